//! End-to-end fitting, encoding and evaluation for every method.

use std::borrow::Cow;

use log::{debug, warn};
use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::eval::{cross_validate, cross_validate_with, EncodedClip, EvalReport, SplitMode};
use crate::classify::stats::stat_features;
use crate::classify::svm::train_ovr;
use crate::config::{Method, RunConfig};
use crate::data::{ClipRecord, Label, SensorStream};
use crate::error::{Error, Result};
use crate::fisher::{
    encode_fv, normalize_fv, reduce_sensor_features, sensor_windows, FisherVector, FvLayout, SensorFeatureParams,
};
use crate::gmm::{fit_gmm, GmmCodebook};
use crate::mfv::{build_sensor_codebook, concat_fv, encode_mfv, pair_features, MultimodalCodebook, PairedFeature, MULTIMODAL_FORMAT_VERSION};
use crate::pca::{fit_pca, half_dim, PcaModel};
use crate::sensor::ChannelScaler;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Sensor reduction and codebook for FVS/TFVS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub params: SensorFeatureParams,
    pub pca: Option<PcaModel>,
    pub gmm: GmmCodebook,
}

impl SensorModel {
    pub fn encode(&self, stream: &SensorStream) -> Result<FisherVector> {
        let (windows, orders) = sensor_windows(stream, &self.params)?;
        let features = reduce_sensor_features(windows.view(), &orders, self.pca.as_ref(), self.params.temporal)?;
        normalize_fv(&encode_fv(&self.gmm, features.view())?)
    }
}

/// Video reduction and codebook for FVV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoModel {
    pub pca: Option<PcaModel>,
    pub gmm: GmmCodebook,
}

impl VideoModel {
    pub fn encode(&self, clip: &ClipRecord) -> Result<FisherVector> {
        let reduced = reduce_video(self.pca.as_ref(), clip)?;
        normalize_fv(&encode_fv(&self.gmm, reduced.view())?)
    }
}

/// Z-scoring of the statistics baseline, fit on training clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatModel {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

/// Everything fit on training clips that encoding needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub method: Method,
    pub seed: u64,
    pub config_hash: String,
    pub fit_hash: String,
    pub training_clips: usize,
    pub scaler: Option<ChannelScaler>,
    pub sensor: Option<SensorModel>,
    pub video: Option<VideoModel>,
    pub multimodal: Option<MultimodalCodebook>,
    pub stats: Option<StatModel>,
}

impl FittedModel {
    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("model serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Block layout of the encoded vectors; `None` for the statistics
    /// baseline.
    pub fn layout(&self) -> Option<FvLayout> {
        if let Some(m) = &self.multimodal {
            return Some(FvLayout::Gmm {
                components: m.video.components(),
                dims: vec![m.video.dim(), m.sensor.dim()],
            });
        }
        let video = self.video.as_ref().map(|v| FvLayout::single(v.gmm.components(), v.gmm.dim()));
        let sensor = self.sensor.as_ref().map(|s| FvLayout::single(s.gmm.components(), s.gmm.dim()));
        match (video, sensor) {
            (Some(v), Some(s)) => Some(FvLayout::Concat(vec![v, s])),
            (v, s) => v.or(s),
        }
    }

    pub fn encoded_len(&self) -> usize {
        match (&self.stats, self.layout()) {
            (Some(s), _) => s.mean.len(),
            (None, Some(l)) => l.len(),
            (None, None) => 0,
        }
    }
}

fn scaled<'a>(scaler: Option<&ChannelScaler>, stream: &'a SensorStream) -> Result<Cow<'a, SensorStream>> {
    match scaler {
        Some(s) => Ok(Cow::Owned(s.apply(stream)?)),
        None => Ok(Cow::Borrowed(stream)),
    }
}

fn stack(blocks: &[Array2<f64>]) -> Result<Array2<f64>> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::validation(format!("feature dimensions differ: {e}")))
}

fn trajectory_matrix(clip: &ClipRecord) -> Result<Array2<f64>> {
    let dim = clip
        .descriptor_dim()
        .ok_or_else(|| Error::validation(format!("clip {} has no video trajectories", clip.clip_id)))?;
    let mut m = Array2::zeros((clip.trajectories.len(), dim));
    for (mut row, t) in m.rows_mut().into_iter().zip(&clip.trajectories) {
        if t.vector.len() != dim {
            return Err(Error::validation(format!("clip {}: ragged trajectory descriptors", clip.clip_id)));
        }
        row.assign(&ndarray::ArrayView1::from(&t.vector));
    }
    Ok(m)
}

fn reduce_video(pca: Option<&PcaModel>, clip: &ClipRecord) -> Result<Array2<f64>> {
    let m = trajectory_matrix(clip)?;
    match pca {
        Some(p) => p.transform(m.view()),
        None => Ok(m),
    }
}

/// Window matrices of every stream plus a fitted sensor PCA.
fn sensor_reduction(
    config: &RunConfig,
    streams: &[Cow<'_, SensorStream>],
    params: &SensorFeatureParams,
) -> Result<(Vec<(Array2<f64>, Vec<f64>)>, Option<PcaModel>)> {
    let windows: Vec<_> = streams
        .par_iter()
        .map(|s| sensor_windows(s, params))
        .collect::<Result<_>>()?;
    let pca = if config.sensor.pca {
        let all = stack(&windows.iter().map(|(w, _)| w.clone()).collect::<Vec<_>>())?;
        let target = config.sensor.pca_dim.unwrap_or_else(|| half_dim(all.ncols()));
        Some(fit_pca(all.view(), target)?)
    } else {
        None
    };
    Ok((windows, pca))
}

fn fit_sensor_model(config: &RunConfig, streams: &[Cow<'_, SensorStream>], temporal: bool) -> Result<SensorModel> {
    let params = config.sensor.feature_params(temporal);
    let (windows, pca) = sensor_reduction(config, streams, &params)?;
    let features: Vec<_> = windows
        .iter()
        .map(|(w, o)| reduce_sensor_features(w.view(), o, pca.as_ref(), temporal))
        .collect::<Result<_>>()?;
    let gmm = fit_gmm(stack(&features)?.view(), config.sensor.clusters, config.seed, &config.em_options())?;
    Ok(SensorModel { params, pca, gmm })
}

fn fit_video_model(config: &RunConfig, clips: &[&ClipRecord]) -> Result<VideoModel> {
    let blocks: Vec<_> = clips.iter().map(|c| trajectory_matrix(c)).collect::<Result<_>>()?;
    let all = stack(&blocks)?;
    let pca = if config.video.pca_half {
        Some(fit_pca(all.view(), half_dim(all.ncols()))?)
    } else {
        None
    };
    let reduced = match &pca {
        Some(p) => p.transform(all.view())?,
        None => all,
    };
    let gmm = fit_gmm(reduced.view(), config.video.gaussians, config.seed, &config.video_em_options())?;
    Ok(VideoModel { pca, gmm })
}

/// Pairs a clip's reduced trajectories with its temporal sensor features.
fn clip_pairs(
    clip: &ClipRecord,
    stream: &SensorStream,
    video_pca: Option<&PcaModel>,
    sensor_pca: Option<&PcaModel>,
    params: &SensorFeatureParams,
) -> Result<Vec<PairedFeature>> {
    let reduced = reduce_video(video_pca, clip)?;
    let (windows, orders) = sensor_windows(stream, params)?;
    let sensor = reduce_sensor_features(windows.view(), &orders, sensor_pca, params.temporal)?;
    let starts: Vec<usize> = clip.trajectories.iter().map(|t| t.start_frame).collect();
    pair_features(reduced.view(), &starts, sensor.view())
}

fn fit_multimodal(
    config: &RunConfig,
    clips: &[&ClipRecord],
    streams: &[Cow<'_, SensorStream>],
) -> Result<MultimodalCodebook> {
    let video = fit_video_model(config, clips)?;
    let params = config.sensor.feature_params(true);
    let (_, sensor_pca) = sensor_reduction(config, streams, &params)?;
    let pairs: Vec<Vec<PairedFeature>> = clips
        .par_iter()
        .zip(streams)
        .map(|(c, s)| clip_pairs(c, s, video.pca.as_ref(), sensor_pca.as_ref(), &params))
        .collect::<Result<_>>()?;
    let sensor = build_sensor_codebook(&video.gmm, &pairs, &config.em_options())?;
    let codebook = MultimodalCodebook {
        format_version: MULTIMODAL_FORMAT_VERSION,
        video: video.gmm,
        sensor,
        video_pca: video.pca,
        sensor_pca,
        sensor_params: params,
    };
    codebook.validate()?;
    Ok(codebook)
}

fn fit_stats(streams: &[Cow<'_, SensorStream>]) -> Result<StatModel> {
    let rows: Vec<Array1<f64>> = streams.par_iter().map(|s| stat_features(s)).collect::<Result<_>>()?;
    let views: Vec<_> = rows.iter().map(|r| r.view().insert_axis(Axis(0))).collect();
    let m = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::validation(e.to_string()))?;
    let mean = m.mean_axis(Axis(0)).expect("non-empty");
    let std = m.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    Ok(StatModel { mean, std })
}

/// Fits everything `config.method` needs on the given training clips.
pub fn fit_model(config: &RunConfig, clips: &[&ClipRecord]) -> Result<FittedModel> {
    if clips.is_empty() {
        return Err(Error::validation("no training clips"));
    }
    let method = config.method;
    let scaler = if config.sensor.standardize && method != Method::StatBaseline {
        Some(ChannelScaler::fit(clips.iter().map(|c| &c.sensor))?)
    } else {
        None
    };
    let streams: Vec<Cow<'_, SensorStream>> = clips
        .iter()
        .map(|c| scaled(scaler.as_ref(), &c.sensor))
        .collect::<Result<_>>()?;

    let sensor = match method.sensor_fv() {
        Some(temporal) => Some(fit_sensor_model(config, &streams, temporal)?),
        None => None,
    };
    let video = match method {
        Method::Fvv | Method::FvvFvs | Method::FvvTfvs => Some(fit_video_model(config, clips)?),
        _ => None,
    };
    let multimodal = match method {
        Method::Mfv => Some(fit_multimodal(config, clips, &streams)?),
        _ => None,
    };
    let stats = match method {
        Method::StatBaseline => Some(fit_stats(&streams)?),
        _ => None,
    };
    Ok(FittedModel {
        format_version: MODEL_FORMAT_VERSION,
        method,
        seed: config.seed,
        config_hash: config.config_hash(),
        fit_hash: config.fit_hash(),
        training_clips: clips.len(),
        scaler,
        sensor,
        video,
        multimodal,
        stats,
    })
}

/// Final feature vector of one clip under a fitted model.
pub fn encode_clip(model: &FittedModel, clip: &ClipRecord) -> Result<Array1<f64>> {
    let stream = scaled(model.scaler.as_ref(), &clip.sensor)?;
    if let Some(s) = &model.stats {
        let f = stat_features(&stream)?;
        if f.len() != s.mean.len() {
            return Err(Error::validation("channel count differs from the fitted model"));
        }
        return Ok((f - &s.mean) / &s.std);
    }
    if let Some(m) = &model.multimodal {
        let pairs = clip_pairs(clip, &stream, m.video_pca.as_ref(), m.sensor_pca.as_ref(), &m.sensor_params)?;
        return Ok(encode_mfv(&m.video, &m.sensor, &pairs)?.values);
    }
    let video = model.video.as_ref().map(|v| v.encode(clip)).transpose()?;
    let sensor = model.sensor.as_ref().map(|s| s.encode(&stream)).transpose()?;
    let fv = match (video, sensor) {
        (Some(v), Some(s)) => concat_fv(&v, &s)?,
        (Some(v), None) => v,
        (None, Some(s)) => s,
        (None, None) => return Err(Error::validation("model has nothing to encode with")),
    };
    Ok(fv.values)
}

pub fn encode_clips(model: &FittedModel, clips: &[&ClipRecord]) -> Result<Vec<EncodedClip>> {
    clips
        .par_iter()
        .map(|c| {
            encode_clip(model, c).map(|values| EncodedClip {
                clip_id: c.clip_id.clone(),
                label: c.label,
                values,
            })
        })
        .collect()
}

/// Splits off clips the method cannot encode (no trajectories for video
/// methods), returning the usable clips and the excluded ids.
pub fn usable_clips(method: Method, clips: &[ClipRecord]) -> (Vec<&ClipRecord>, Vec<String>) {
    if !method.uses_video() {
        return (clips.iter().collect(), Vec::new());
    }
    let (ok, missing): (Vec<&ClipRecord>, Vec<&ClipRecord>) = clips.iter().partition(|c| c.has_trajectories());
    (ok, missing.into_iter().map(|c| c.clip_id.clone()).collect())
}

fn config_notes(config: &RunConfig) -> Vec<String> {
    let s = &config.sensor;
    let v = &config.video;
    let sensor = |temporal: bool| {
        format!(
            "sensor: {} w={} stages={} k={} mode={:?} pca={}",
            if temporal { "TFVS" } else { "FVS" },
            s.window,
            s.stages,
            s.clusters,
            s.mode,
            s.pca
        )
    };
    let video = format!("video: FVV K={} pca_half={}", v.gaussians, v.pca_half);
    match config.method {
        Method::Fvs | Method::Tfvs => vec![sensor(config.method == Method::Tfvs)],
        Method::Fvv => vec![video],
        Method::FvvFvs | Method::FvvTfvs => vec![video, sensor(config.method == Method::FvvTfvs)],
        Method::Mfv => vec![video, format!("sensor: joint w={} stages={} mode={:?}", s.window, s.stages, s.mode)],
        Method::StatBaseline => vec!["statistics: mean, std, mean absolute deviation, peak interval".into()],
    }
}

/// Cross-validates `config.method` on `clips`.
///
/// With `refit_per_fold` every reduction and codebook is fit on the training
/// folds only; otherwise they are fit once on all clips (faster, flagged in
/// the report's split descriptor).
pub fn evaluate(config: &RunConfig, clips: &[ClipRecord]) -> Result<EvalReport> {
    config.validate()?;
    let (usable, excluded) = usable_clips(config.method, clips);
    if !excluded.is_empty() {
        warn!(
            "{}: excluding {} clips without video trajectories: {}",
            config.method,
            excluded.len(),
            excluded.join(", ")
        );
    }
    let labels: Vec<Label> = usable.iter().map(|c| c.label).collect();
    let cost = config.classifier.cost;
    let folds = config.classifier.folds;
    let mut report = if config.classifier.refit_per_fold {
        cross_validate_with(
            config.method.display_name(),
            &labels,
            folds,
            config.seed,
            cost,
            SplitMode::RefitPerFold,
            |train, test| {
                let train: Vec<&ClipRecord> = train.iter().map(|&i| usable[i]).collect();
                let test: Vec<&ClipRecord> = test.iter().map(|&i| usable[i]).collect();
                let model = fit_model(config, &train)?;
                debug!("{}: fold codebook fit on {} clips", config.method, train.len());
                let encoded = encode_clips(&model, &train)?;
                let x = encoded_matrix(&encoded)?;
                let y: Vec<Label> = encoded.iter().map(|e| e.label).collect();
                let svm = train_ovr(x.view(), &y, cost, config.seed)?;
                test.iter()
                    .map(|c| svm.predict(encode_clip(&model, c)?.view()).map(|(l, _)| l))
                    .collect()
            },
        )?
    } else {
        let model = fit_model(config, &usable)?;
        let encoded = encode_clips(&model, &usable)?;
        let mut r = cross_validate(&encoded, folds, config.seed, cost)?;
        r.method = config.method.display_name().to_owned();
        r
    };
    report.split.config_hash = Some(config.config_hash());
    report.notes = config_notes(config);
    if !excluded.is_empty() {
        report.notes.push(format!("excluded without trajectories: {}", excluded.join(", ")));
    }
    Ok(report)
}

pub const ENCODED_SCHEMA_VERSION: u32 = 1;

/// Encoded clips together with the provenance of the codebook that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub schema_version: u32,
    pub method: Method,
    pub seed: u64,
    pub config_hash: String,
    pub codebook_hash: String,
    /// Block layout of each row; absent for the statistics baseline.
    pub layout: Option<FvLayout>,
    pub dim: usize,
    pub clips: Vec<EncodedClip>,
}

impl EncodedMatrix {
    pub fn new(model: &FittedModel, clips: Vec<EncodedClip>) -> Self {
        EncodedMatrix {
            schema_version: ENCODED_SCHEMA_VERSION,
            method: model.method,
            seed: model.seed,
            config_hash: model.config_hash.clone(),
            codebook_hash: model.content_hash(),
            layout: model.layout(),
            dim: model.encoded_len(),
            clips,
        }
    }

    /// `clip_id,label,v0,v1,...`, one row per clip.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let io_err = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(e) => Error::io(path, e),
            other => Error::validation(format!("{other:?}")),
        };
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        let mut header = vec!["clip_id".to_owned(), "label".to_owned()];
        header.extend((0..self.dim).map(|i| format!("v{i}")));
        w.write_record(&header).map_err(io_err)?;
        for c in &self.clips {
            let mut row = vec![c.clip_id.clone(), c.label.to_string()];
            row.extend(c.values.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Stacks encoded clips into a row matrix.
pub fn encoded_matrix(encoded: &[EncodedClip]) -> Result<Array2<f64>> {
    let dim = encoded.first().map_or(0, |e| e.values.len());
    let mut x = Array2::zeros((encoded.len(), dim));
    for (mut row, e) in x.rows_mut().into_iter().zip(encoded) {
        if e.values.len() != dim {
            return Err(Error::validation("encoded clips differ in length"));
        }
        row.assign(&e.values);
    }
    Ok(x)
}
