//! Multimodal Fisher vectors.
//!
//! Each video trajectory `x` is paired with the sensor window `s` that starts
//! on the same frame. The pair is modelled as
//!
//! ```text
//! p(x, s) = Σ_i θ_i p(x | ω = i) p(s | ω = i)
//! ```
//!
//! where `p(x | ω)` are the video GMM components and `p(s | ω)` one diagonal
//! Gaussian per component, fit on the sensor windows whose paired
//! trajectories the video GMM assigns to that component.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{
    accumulate_gaussian_grads, finish_average, normalize_fv, FisherVector, FvLayout, SensorFeatureParams,
};
use crate::gmm::{
    argmax_first, fit_single_gaussian, log_gaussian, normalize_log, EmOptions, GmmCodebook,
    SensorCodebook, SingleGaussian,
};
use crate::pca::PcaModel;

pub const MULTIMODAL_FORMAT_VERSION: u32 = 1;

/// Joint codebook: the video GMM, one sensor Gaussian per video component,
/// and the reductions that produce both feature types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalCodebook {
    pub format_version: u32,
    pub video: GmmCodebook,
    pub sensor: SensorCodebook,
    pub video_pca: Option<PcaModel>,
    pub sensor_pca: Option<PcaModel>,
    pub sensor_params: SensorFeatureParams,
}

impl MultimodalCodebook {
    pub fn validate(&self) -> Result<()> {
        check_dims(&self.video, &self.sensor, self.video.dim(), self.sensor.dim())?;
        if let Some(p) = &self.video_pca {
            if p.output_dim() != self.video.dim() {
                return Err(Error::validation("video PCA output does not match the video GMM"));
            }
        }
        let sensor_dim = self.sensor_pca.as_ref().map(PcaModel::output_dim);
        if let Some(d) = sensor_dim {
            if d + usize::from(self.sensor_params.temporal) != self.sensor.dim() {
                return Err(Error::validation("sensor PCA output does not match the sensor Gaussians"));
            }
        }
        Ok(())
    }

    /// Length of the encoded vectors, `(2D + 2(d+1) + 1)K`.
    pub fn fv_len(&self) -> usize {
        (2 * self.video.dim() + 2 * self.sensor.dim() + 1) * self.video.components()
    }

    pub fn encode(&self, pairs: &[PairedFeature]) -> Result<FisherVector> {
        encode_mfv(&self.video, &self.sensor, pairs)
    }
}

/// A video descriptor and its same-start sensor feature.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedFeature {
    /// Reduced video descriptor.
    pub x: Array1<f64>,
    /// Reduced, temporally enhanced sensor feature.
    pub s: Array1<f64>,
    pub start_frame: usize,
    /// Start index of the sensor window `s` came from. Several trajectories
    /// may share one window.
    pub window_index: usize,
}

/// Pairs every trajectory with the sensor window starting on its frame.
///
/// Row `i` of `sensor` must be the window starting at sample `i`. Start
/// frames past the last window are clamped onto it.
pub fn pair_features(
    reduced: ArrayView2<f64>,
    start_frames: &[usize],
    sensor: ArrayView2<f64>,
) -> Result<Vec<PairedFeature>> {
    if reduced.nrows() != start_frames.len() {
        return Err(Error::validation("one start frame per trajectory required"));
    }
    if sensor.nrows() == 0 {
        return Err(Error::validation("no sensor windows to pair with"));
    }
    let last = sensor.nrows() - 1;
    Ok(reduced
        .rows()
        .into_iter()
        .zip(start_frames)
        .map(|(x, &start_frame)| {
            let window_index = start_frame.min(last);
            PairedFeature {
                x: x.to_owned(),
                s: sensor.row(window_index).to_owned(),
                start_frame,
                window_index,
            }
        })
        .collect())
}

/// Fits one sensor Gaussian per video component.
///
/// `clips` holds the training pairs grouped by clip. Each distinct sensor
/// window (clip, window index) is labelled by max pooling: among its paired
/// trajectories, the one with the highest peak posterior decides, and the
/// window takes that trajectory's most responsible component. Equal peaks go
/// to the smaller component index. Components that receive no window get a
/// Gaussian fit to all windows and occupancy 0.
pub fn build_sensor_codebook(
    video: &GmmCodebook,
    clips: &[Vec<PairedFeature>],
    opts: &EmOptions,
) -> Result<SensorCodebook> {
    let k = video.components();
    // (clip, window) -> (peak posterior, component, feature)
    let mut labelled: BTreeMap<(usize, usize), (f64, usize, ArrayView1<f64>)> = BTreeMap::new();
    for (c, pairs) in clips.iter().enumerate() {
        for p in pairs {
            let q = video.responsibilities(p.x.view())?;
            let omega = argmax_first(q.view());
            let peak = q[omega];
            labelled
                .entry((c, p.window_index))
                .and_modify(|best| {
                    if peak > best.0 || (peak == best.0 && omega < best.1) {
                        *best = (peak, omega, p.s.view());
                    }
                })
                .or_insert((peak, omega, p.s.view()));
        }
    }
    if labelled.is_empty() {
        return Err(Error::validation("no paired features to build a sensor codebook from"));
    }

    let dim = labelled.values().next().map(|(_, _, s)| s.len()).unwrap_or(0);
    if labelled.values().any(|(_, _, s)| s.len() != dim) {
        return Err(Error::validation("sensor features differ in dimensionality"));
    }
    let all = ndarray::stack(
        Axis(0),
        &labelled.values().map(|(_, _, s)| s.view()).collect::<Vec<_>>(),
    )
    .map_err(|e| Error::validation(e.to_string()))?;
    let floor = opts.variance_floor(all.view());
    let fallback = fit_single_gaussian(all.view(), floor.view()).expect("non-empty");

    let mut per_cluster = Vec::with_capacity(k);
    let mut occupancy = Vec::with_capacity(k);
    for omega in 0..k {
        let rows: Vec<ArrayView1<f64>> = labelled
            .values()
            .filter(|(_, w, _)| *w == omega)
            .map(|(_, _, s)| s.view())
            .collect();
        occupancy.push(rows.len());
        if rows.is_empty() {
            per_cluster.push(fallback.clone());
        } else {
            let data = ndarray::stack(Axis(0), &rows).map_err(|e| Error::validation(e.to_string()))?;
            per_cluster.push(fit_single_gaussian(data.view(), floor.view()).expect("non-empty"));
        }
    }
    Ok(SensorCodebook {
        per_cluster,
        occupancy,
    })
}

/// Joint posteriors `q_i ∝ θ_i p(x | i) p(s | i)`.
pub fn joint_responsibilities(
    video: &GmmCodebook,
    sensor: &SensorCodebook,
    x: ArrayView1<f64>,
    s: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_dims(video, sensor, x.len(), s.len())?;
    if x.iter().chain(s.iter()).any(|v| !v.is_finite()) {
        return Err(Error::validation("paired feature has non-finite values"));
    }
    let mut lj = video.log_joint(x);
    for (i, g) in sensor.per_cluster.iter().enumerate() {
        lj[i] += g.log_density(s);
    }
    Ok(normalize_log(lj))
}

fn check_dims(video: &GmmCodebook, sensor: &SensorCodebook, x: usize, s: usize) -> Result<()> {
    if sensor.components() != video.components() {
        return Err(Error::validation(format!(
            "sensor codebook has {} clusters, video codebook {}",
            sensor.components(),
            video.components()
        )));
    }
    if x != video.dim() || s != sensor.dim() {
        return Err(Error::validation(format!(
            "paired feature dims ({x}, {s}) do not match codebook dims ({}, {})",
            video.dim(),
            sensor.dim()
        )));
    }
    Ok(())
}

fn stack_sensor(sensor: &SensorCodebook, f: impl Fn(&SingleGaussian) -> ArrayView1<f64>) -> Array2<f64> {
    let rows: Vec<_> = sensor.per_cluster.iter().map(f).collect();
    ndarray::stack(Axis(0), &rows).expect("consistent sensor dims")
}

/// Averaged joint-model gradients before normalization, laid out as
/// `[α | μx | Σx⁻¹ | μs | Σs⁻¹]`.
pub fn encode_mfv_unnormalized(
    video: &GmmCodebook,
    sensor: &SensorCodebook,
    pairs: &[PairedFeature],
) -> Result<FisherVector> {
    if pairs.is_empty() {
        return Err(Error::validation("cannot encode an empty pair set"));
    }
    let k = video.components();
    let (dx, ds) = (video.dim(), sensor.dim());
    let layout = FvLayout::Gmm {
        components: k,
        dims: vec![dx, ds],
    };
    let sensor_means = stack_sensor(sensor, |g| g.mean.view());
    let sensor_vars = stack_sensor(sensor, |g| g.variances.view());

    let mut values = Array1::zeros(layout.len());
    {
        let (mut alpha, rest) = values.view_mut().split_at(Axis(0), k);
        let (mut mu_x, rest) = rest.split_at(Axis(0), k * dx);
        let (mut prec_x, rest) = rest.split_at(Axis(0), k * dx);
        let (mut mu_s, mut prec_s) = rest.split_at(Axis(0), k * ds);
        for p in pairs {
            let q = joint_responsibilities(video, sensor, p.x.view(), p.s.view())?;
            alpha += &q;
            accumulate_gaussian_grads(
                q.view(),
                p.x.view(),
                video.means.view(),
                video.variances.view(),
                mu_x.view_mut(),
                prec_x.view_mut(),
            );
            accumulate_gaussian_grads(
                q.view(),
                p.s.view(),
                sensor_means.view(),
                sensor_vars.view(),
                mu_s.view_mut(),
                prec_s.view_mut(),
            );
        }
    }
    finish_average(&mut values, pairs.len(), k, video.weights.view());
    Ok(FisherVector {
        values,
        layout,
        normalized: false,
    })
}

/// Power/L2 normalized multimodal Fisher vector of length `(2D + 2(d+1) + 1)K`.
pub fn encode_mfv(
    video: &GmmCodebook,
    sensor: &SensorCodebook,
    pairs: &[PairedFeature],
) -> Result<FisherVector> {
    normalize_fv(&encode_mfv_unnormalized(video, sensor, pairs)?)
}

/// Mean log-likelihood of pairs under the joint model.
pub fn mean_joint_log_likelihood(video: &GmmCodebook, sensor: &SensorCodebook, pairs: &[PairedFeature]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let mut lj = video.log_joint(p.x.view());
            for (i, g) in sensor.per_cluster.iter().enumerate() {
                lj[i] += log_gaussian(p.s.view(), g.mean.view(), g.variances.view());
            }
            crate::gmm::log_sum_exp(lj.view())
        })
        .sum();
    total / pairs.len() as f64
}

/// Concatenates two normalized Fisher vectors and L2-normalizes the result.
pub fn concat_fv(a: &FisherVector, b: &FisherVector) -> Result<FisherVector> {
    if !a.normalized || !b.normalized {
        return Err(Error::validation("concat_fv expects normalized inputs"));
    }
    let mut values = ndarray::concatenate(Axis(0), &[a.values.view(), b.values.view()])
        .map_err(|e| Error::validation(e.to_string()))?;
    let norm = values.dot(&values).sqrt();
    if norm > 0.0 {
        values /= norm;
    }
    Ok(FisherVector {
        values,
        layout: FvLayout::Concat(vec![a.layout.clone(), b.layout.clone()]),
        normalized: true,
    })
}
