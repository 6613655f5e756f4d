//! Trajectory-like sensor features.
//!
//! A window of `w` samples slides one sample at a time over the stream. Each
//! window becomes one feature vector, either the within-window first
//! differences (the sensor analogue of a trajectory's displacement vectors)
//! or the raw samples. The stream is then cut into `S` stages and every
//! window is tagged with its normalized stage index.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::SensorStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// `(w - 1) * C` values: first differences inside the window.
    #[default]
    Displacement,
    /// `w * C` values: the raw samples.
    Raw,
}

impl WindowMode {
    pub fn feature_dim(self, window: usize, channels: usize) -> usize {
        match self {
            WindowMode::Displacement => window.saturating_sub(1) * channels,
            WindowMode::Raw => window * channels,
        }
    }
}

impl std::str::FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displacement" => Ok(WindowMode::Displacement),
            "raw" => Ok(WindowMode::Raw),
            other => Err(Error::validation(format!("unknown window mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorWindowFeature {
    pub start_index: usize,
    /// Channel-major: all values of channel 0, then channel 1, ...
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEnhancedFeature {
    pub base: SensorWindowFeature,
    /// 1-based stage index.
    pub stage_index: usize,
    /// `stage_index / S`, in (0, 1].
    pub order: f64,
}

/// Slides a `window`-sample window over the stream with stride 1.
pub fn extract_windows(
    stream: &SensorStream,
    window: usize,
    mode: WindowMode,
) -> Result<Vec<SensorWindowFeature>> {
    let len = stream.len();
    if window > len {
        return Err(Error::validation(format!(
            "window {window} longer than stream {} ({len} samples)",
            stream.clip_id
        )));
    }
    let min_window = match mode {
        WindowMode::Displacement => 2,
        WindowMode::Raw => 1,
    };
    if window < min_window {
        return Err(Error::validation(format!(
            "window {window} too short for {mode:?} mode (minimum {min_window})"
        )));
    }

    let channels = stream.channels();
    let dim = mode.feature_dim(window, channels);
    let windows = stream
        .samples
        .axis_windows(Axis(0), window)
        .into_iter()
        .enumerate()
        .map(|(start_index, block)| {
            let mut vector = Vec::with_capacity(dim);
            for column in block.columns() {
                match mode {
                    WindowMode::Displacement => {
                        vector.extend(column.windows(2).into_iter().map(|p| p[1] - p[0]))
                    }
                    WindowMode::Raw => vector.extend(column.iter().copied()),
                }
            }
            SensorWindowFeature {
                start_index,
                vector,
            }
        })
        .collect();
    Ok(windows)
}

/// Stage of the window starting at `start_index`: the `L - w + 1` window
/// starts are split into `stages` equal runs, numbered from 1.
pub fn assign_stage(start_index: usize, len: usize, window: usize, stages: usize) -> (usize, f64) {
    debug_assert!(stages >= 1 && window <= len && start_index + window <= len);
    let count = len + 1 - window;
    let stage = (start_index * stages / count + 1).clamp(1, stages);
    (stage, stage as f64 / stages as f64)
}

/// Tags every window with its stage and normalized order. The order is kept
/// as metadata; it is appended to the numeric vector after dimensionality
/// reduction.
pub fn enhance(
    windows: Vec<SensorWindowFeature>,
    len: usize,
    window: usize,
    stages: usize,
) -> Result<Vec<TemporalEnhancedFeature>> {
    if stages == 0 {
        return Err(Error::validation("stage count must be at least 1"));
    }
    windows
        .into_iter()
        .map(|base| {
            if base.start_index + window > len {
                return Err(Error::validation(format!(
                    "window start {} outside stream of length {len}",
                    base.start_index
                )));
            }
            let (stage_index, order) = assign_stage(base.start_index, len, window, stages);
            Ok(TemporalEnhancedFeature {
                base,
                stage_index,
                order,
            })
        })
        .collect()
}

/// Per-channel z-scoring fit on training streams only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScaler {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl ChannelScaler {
    pub fn fit<'a>(streams: impl IntoIterator<Item = &'a SensorStream>) -> Result<Self> {
        let blocks: Vec<_> = streams.into_iter().map(|s| s.samples.view()).collect();
        if blocks.is_empty() {
            return Err(Error::validation("cannot fit a channel scaler on no streams"));
        }
        let all = ndarray::concatenate(Axis(0), &blocks)
            .map_err(|e| Error::validation(format!("streams disagree on channels: {e}")))?;
        let mean = all.mean_axis(Axis(0)).expect("non-empty");
        let std = all
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Ok(ChannelScaler { mean, std })
    }

    pub fn apply(&self, stream: &SensorStream) -> Result<SensorStream> {
        if stream.channels() != self.mean.len() {
            return Err(Error::validation("channel count differs from fitted scaler"));
        }
        let samples: Array2<f64> = (&stream.samples - &self.mean) / &self.std;
        Ok(SensorStream {
            samples,
            ..stream.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(len: usize, channels: usize, f: impl Fn(usize, usize) -> f64) -> SensorStream {
        SensorStream::from_samples("t", Array2::from_shape_fn((len, channels), |(r, c)| f(r, c)))
            .unwrap()
    }

    #[test]
    fn window_counts() {
        let s = stream(150, 19, |r, c| (r * c) as f64);
        assert_eq!(extract_windows(&s, 3, WindowMode::Displacement).unwrap().len(), 148);
        let s = stream(10, 2, |r, _| r as f64);
        let w = extract_windows(&s, 10, WindowMode::Raw).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].vector.len(), 20);
    }

    #[test]
    fn invalid_windows() {
        let s = stream(5, 2, |_, _| 0.0);
        assert!(extract_windows(&s, 6, WindowMode::Raw).is_err());
        assert!(extract_windows(&s, 1, WindowMode::Displacement).is_err());
        assert!(extract_windows(&s, 1, WindowMode::Raw).is_ok());
    }

    #[test]
    fn constant_stream_has_zero_displacement() {
        let s = stream(30, 4, |_, c| c as f64 * 3.5);
        for w in extract_windows(&s, 4, WindowMode::Displacement).unwrap() {
            assert_eq!(w.vector.len(), 12);
            assert!(w.vector.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn displacement_layout_is_channel_major() {
        let s = stream(4, 2, |r, c| (r * r) as f64 + 100.0 * c as f64);
        let w = extract_windows(&s, 3, WindowMode::Displacement).unwrap();
        assert_eq!(w[1].start_index, 1);
        assert_eq!(w[1].vector, vec![3.0, 5.0, 3.0, 5.0]);
    }

    #[test]
    fn stage_examples() {
        assert_eq!(assign_stage(0, 150, 3, 4), (1, 0.25));
        assert_eq!(assign_stage(147, 150, 3, 4), (4, 1.0));
        for i in [0, 17, 100, 147] {
            assert_eq!(assign_stage(i, 150, 3, 1), (1, 1.0));
        }
    }

    #[test]
    fn stage_populations_for_default_setting() {
        // Oracle: count stages by evaluating the formula directly.
        let mut counts = [0usize; 4];
        for i in 0..148 {
            counts[(i * 4 / 148).min(3)] += 1;
        }
        assert_eq!(counts, [37, 37, 37, 37]);

        let s = stream(150, 19, |r, c| (r + c) as f64);
        let windows = extract_windows(&s, 3, WindowMode::Displacement).unwrap();
        let enhanced = enhance(windows.clone(), 150, 3, 4).unwrap();
        let mut got = [0usize; 4];
        for e in &enhanced {
            got[e.stage_index - 1] += 1;
        }
        assert_eq!(got, counts);

        let single = enhance(windows, 150, 3, 1).unwrap();
        assert!(single.iter().all(|e| e.order == 1.0));
        assert!(enhance(Vec::new(), 150, 3, 4).unwrap().is_empty());
    }

    #[test]
    fn scaler_standardizes_training_channels() {
        let a = stream(50, 3, |r, c| r as f64 * (c + 1) as f64 + 7.0);
        let scaler = ChannelScaler::fit([&a]).unwrap();
        let z = scaler.apply(&a).unwrap();
        for col in z.samples.columns() {
            assert!(col.mean().unwrap().abs() < 1e-12);
            assert!((col.std(0.0) - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn window_count_identity(len in 2usize..200, w in 2usize..20) {
            prop_assume!(w <= len);
            let s = stream(len, 2, |r, c| (r as f64).sin() + c as f64);
            prop_assert_eq!(extract_windows(&s, w, WindowMode::Displacement).unwrap().len(), len - w + 1);
        }

        #[test]
        fn stage_partition(len in 2usize..300, w in 1usize..10, stages in 1usize..9) {
            prop_assume!(w <= len);
            let count = len - w + 1;
            let seq: Vec<usize> = (0..count).map(|i| assign_stage(i, len, w, stages).0).collect();
            prop_assert!(seq.windows(2).all(|p| p[0] <= p[1]));
            prop_assert_eq!(seq[0], 1);
            if count >= stages {
                prop_assert_eq!(*seq.last().unwrap(), stages);
                let mut pops = vec![0usize; stages];
                for s in &seq { pops[s - 1] += 1; }
                let (lo, hi) = (pops.iter().min().unwrap(), pops.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }

        #[test]
        fn displacement_is_shift_invariant(offset in -1e3f64..1e3, seed in 0u64..1000) {
            let s = stream(40, 3, |r, c| ((r * 31 + c * 17) as f64 + seed as f64).sin());
            let shifted = SensorStream { samples: &s.samples + offset, ..s.clone() };
            let a = extract_windows(&s.clone(), 3, WindowMode::Displacement).unwrap();
            let b = extract_windows(&shifted, 3, WindowMode::Displacement).unwrap();
            for (x, y) in a.iter().zip(&b) {
                for (u, v) in x.vector.iter().zip(&y.vector) {
                    prop_assert!((u - v).abs() <= 1e-12 * (1.0 + offset.abs()));
                }
            }
        }

        #[test]
        fn reversal_mirrors_stages(len in 4usize..120, w in 1usize..4, stages in 1usize..6) {
            prop_assume!(w <= len);
            let count = len - w + 1;
            prop_assume!(count % stages == 0);
            let s = stream(len, 2, |r, c| (r * 3 + c) as f64 * 0.25);
            let mut rev = s.samples.clone();
            rev.invert_axis(Axis(0));
            let r = SensorStream { samples: rev, ..s.clone() };
            let fwd = enhance(extract_windows(&s, w, WindowMode::Raw).unwrap(), len, w, stages).unwrap();
            let bwd = enhance(extract_windows(&r, w, WindowMode::Raw).unwrap(), len, w, stages).unwrap();
            let fs: Vec<usize> = fwd.iter().map(|e| e.stage_index).collect();
            let mut bs: Vec<usize> = bwd.iter().map(|e| stages + 1 - e.stage_index).collect();
            bs.reverse();
            prop_assert_eq!(fs, bs);
            let mut fa: Vec<f64> = fwd.iter().flat_map(|e| e.base.vector.iter().map(|v| v.abs())).collect();
            let mut ba: Vec<f64> = bwd.iter().flat_map(|e| e.base.vector.iter().map(|v| v.abs())).collect();
            fa.sort_by(f64::total_cmp);
            ba.sort_by(f64::total_cmp);
            prop_assert_eq!(fa, ba);
        }
    }
}
