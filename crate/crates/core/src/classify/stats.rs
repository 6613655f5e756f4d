use ndarray::{Array1, ArrayView1};

use crate::data::SensorStream;
use crate::error::{Error, Result};

pub const STATS_PER_CHANNEL: usize = 4;

/// Global per-channel statistics used as the feature-engineering baseline:
/// mean, standard deviation, mean absolute deviation and mean time between
/// peaks (in samples), laid out channel by channel.
///
/// A peak is a local maximum (`x[t-1] < x[t] >= x[t+1]`) above
/// `mean + 0.5 * std`. Channels with fewer than two peaks report the stream
/// length.
pub fn stat_features(stream: &SensorStream) -> Result<Array1<f64>> {
    let len = stream.len();
    if len < 2 {
        return Err(Error::validation(format!(
            "clip {}: statistics need at least 2 samples",
            stream.clip_id
        )));
    }
    let mut out = Vec::with_capacity(STATS_PER_CHANNEL * stream.channels());
    for column in stream.samples.columns() {
        let mean = column.mean().expect("non-empty");
        let std = column.std(0.0);
        let mad = column.iter().map(|v| (v - mean).abs()).sum::<f64>() / len as f64;
        out.extend([mean, std, mad, mean_peak_interval(column, mean + 0.5 * std)]);
    }
    Ok(Array1::from(out))
}

fn mean_peak_interval(x: ArrayView1<f64>, threshold: f64) -> f64 {
    let peaks: Vec<usize> = (1..x.len().saturating_sub(1))
        .filter(|&t| x[t] > threshold && x[t] > x[t - 1] && x[t] >= x[t + 1])
        .collect();
    if peaks.len() < 2 {
        return x.len() as f64;
    }
    (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn constant_channel() {
        let s = SensorStream::from_samples("c", Array2::from_elem((30, 1), 4.0)).unwrap();
        let f = stat_features(&s).unwrap();
        assert_eq!(f.to_vec(), vec![4.0, 0.0, 0.0, 30.0]);
    }

    #[test]
    fn sine_period_in_samples() {
        // 1 Hz sine sampled at 10 Hz for 15 s.
        let samples = Array2::from_shape_fn((150, 1), |(t, _)| {
            (std::f64::consts::TAU * t as f64 / 10.0).sin()
        });
        let s = SensorStream::from_samples("sine", samples).unwrap();
        let f = stat_features(&s).unwrap();
        assert!((f[3] - 10.0).abs() <= 1.0, "interval {}", f[3]);
        assert!(f[0].abs() < 1e-12);
        assert!((f[1] - 0.5_f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn output_length_and_short_stream() {
        let s = SensorStream::from_samples("x", Array2::zeros((10, 19))).unwrap();
        assert_eq!(stat_features(&s).unwrap().len(), 76);
        let s = SensorStream::from_samples("x", Array2::zeros((1, 19))).unwrap();
        assert!(stat_features(&s).is_err());
    }
}
