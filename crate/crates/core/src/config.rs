//! Run configuration: one JSON file, every field overridable from the CLI.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fisher::SensorFeatureParams;
use crate::gmm::EmOptions;
use crate::sensor::WindowMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "fvs")]
    Fvs,
    #[serde(rename = "tfvs")]
    Tfvs,
    #[serde(rename = "fvv")]
    Fvv,
    #[serde(rename = "fvv+fvs")]
    FvvFvs,
    #[serde(rename = "fvv+tfvs")]
    FvvTfvs,
    #[serde(rename = "mfv")]
    Mfv,
    #[serde(rename = "stat-baseline")]
    StatBaseline,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Fvs,
        Method::Tfvs,
        Method::Fvv,
        Method::FvvFvs,
        Method::FvvTfvs,
        Method::Mfv,
        Method::StatBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fvs => "fvs",
            Method::Tfvs => "tfvs",
            Method::Fvv => "fvv",
            Method::FvvFvs => "fvv+fvs",
            Method::FvvTfvs => "fvv+tfvs",
            Method::Mfv => "mfv",
            Method::StatBaseline => "stat-baseline",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Fvs => "FVS",
            Method::Tfvs => "TFVS",
            Method::Fvv => "FVV",
            Method::FvvFvs => "FVV+FVS",
            Method::FvvTfvs => "FVV+TFVS",
            Method::Mfv => "MFV",
            Method::StatBaseline => "Statistics+SVM",
        }
    }

    pub fn uses_video(self) -> bool {
        matches!(self, Method::Fvv | Method::FvvFvs | Method::FvvTfvs | Method::Mfv)
    }

    /// Whether a standalone sensor Fisher vector is part of the encoding, and
    /// with the temporal order or without.
    pub fn sensor_fv(self) -> Option<bool> {
        match self {
            Method::Fvs | Method::FvvFvs => Some(false),
            Method::Tfvs | Method::FvvTfvs => Some(true),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::validation(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoConfig {
    pub gaussians: usize,
    /// Reduce descriptors to half their dimension before the GMM.
    pub pca_half: bool,
    /// Fraction of training descriptors the video GMM is fit on.
    pub subsample_fraction: f64,
    /// Floor on that subsample, so tiny datasets still train.
    pub min_subsample: usize,
}

impl Default for VideoConfig {
    fn default() -> Self {
        VideoConfig {
            gaussians: 25,
            pca_half: true,
            subsample_fraction: 0.01,
            min_subsample: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub window: usize,
    pub stages: usize,
    pub clusters: usize,
    pub mode: WindowMode,
    /// Reduce window features with PCA before encoding.
    pub pca: bool,
    /// PCA target; half the raw window dimension (rounded up) when unset.
    pub pca_dim: Option<usize>,
    /// Z-score channels with statistics of the training clips.
    pub standardize: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            window: 3,
            stages: 4,
            clusters: 4,
            mode: WindowMode::Displacement,
            pca: true,
            pca_dim: None,
            standardize: false,
        }
    }
}

impl SensorConfig {
    pub fn feature_params(&self, temporal: bool) -> SensorFeatureParams {
        SensorFeatureParams {
            window: self.window,
            stages: self.stages,
            mode: self.mode,
            temporal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub cost: f64,
    pub folds: usize,
    /// Refit reductions and codebooks on every training fold. When false,
    /// they are fit once on all clips and the vectors cross-validated.
    pub refit_per_fold: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            cost: crate::classify::svm::DEFAULT_COST,
            folds: crate::classify::eval::DEFAULT_FOLDS,
            refit_per_fold: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthPreset {
    #[default]
    OrderOnly,
    JointFusion,
    Random,
}

impl FromStr for SynthPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "order-only" => Ok(SynthPreset::OrderOnly),
            "joint-fusion" => Ok(SynthPreset::JointFusion),
            "random" => Ok(SynthPreset::Random),
            other => Err(Error::validation(format!("unknown synthetic preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub preset: SynthPreset,
    /// Class count of the `random` preset.
    pub classes: usize,
    pub clips_per_class: usize,
    pub shuffle_labels: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            preset: SynthPreset::OrderOnly,
            classes: 20,
            clips_per_class: 10,
            shuffle_labels: false,
        }
    }
}

impl SynthConfig {
    pub fn spec(&self, seed: u64) -> crate::data::SyntheticSpec {
        let mut spec = match self.preset {
            SynthPreset::OrderOnly => crate::data::SyntheticSpec::order_only(),
            SynthPreset::JointFusion => crate::data::SyntheticSpec::joint_fusion(),
            SynthPreset::Random => crate::data::SyntheticSpec::random_classes(self.classes, seed),
        };
        spec.clips_per_class = self.clips_per_class;
        spec.shuffle_labels = self.shuffle_labels;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Frozen codebook artifact consumed by `encode`.
    pub codebook: Option<PathBuf>,
    pub seed: u64,
    pub method: Method,
    pub video: VideoConfig,
    pub sensor: SensorConfig,
    pub classifier: ClassifierConfig,
    pub em: EmSettings,
    pub synth: SynthConfig,
}

/// EM settings shared by every GMM the pipeline fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub variance_floor_ratio: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        let d = EmOptions::default();
        EmSettings {
            max_iters: d.max_iters,
            tol: d.tol,
            variance_floor_ratio: d.variance_floor_ratio,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            out_dir: PathBuf::from("out"),
            codebook: None,
            seed: 0,
            method: Method::Mfv,
            video: VideoConfig::default(),
            sensor: SensorConfig::default(),
            classifier: ClassifierConfig::default(),
            em: EmSettings::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        if s.window == 0 || s.stages == 0 || s.clusters == 0 {
            return Err(Error::validation("window, stages and clusters must be positive"));
        }
        if s.mode == WindowMode::Displacement && s.window < 2 {
            return Err(Error::validation("displacement windows need at least 2 samples"));
        }
        if self.video.gaussians == 0 {
            return Err(Error::validation("gaussians must be positive"));
        }
        if !(self.video.subsample_fraction > 0.0 && self.video.subsample_fraction <= 1.0) {
            return Err(Error::validation("video subsample fraction must be in (0, 1]"));
        }
        if !(self.classifier.cost > 0.0 && self.classifier.cost.is_finite()) {
            return Err(Error::validation("cost must be positive"));
        }
        if self.classifier.folds < 2 {
            return Err(Error::validation("folds must be at least 2"));
        }
        if self.em.max_iters == 0 || !(self.em.tol >= 0.0) {
            return Err(Error::validation("invalid EM settings"));
        }
        Ok(())
    }

    pub fn em_options(&self) -> EmOptions {
        EmOptions {
            max_iters: self.em.max_iters,
            tol: self.em.tol,
            variance_floor_ratio: self.em.variance_floor_ratio,
            ..EmOptions::default()
        }
    }

    pub fn video_em_options(&self) -> EmOptions {
        EmOptions {
            subsample_fraction: self.video.subsample_fraction,
            min_subsample: self.video.min_subsample,
            ..self.em_options()
        }
    }

    /// Hash of every setting that influences results. Paths are excluded so
    /// the same configuration hashes equally wherever it runs.
    pub fn config_hash(&self) -> String {
        hash_json(&serde_json::json!({
            "seed": self.seed,
            "method": self.method,
            "video": self.video,
            "sensor": self.sensor,
            "classifier": self.classifier,
            "em": self.em,
        }))
    }

    /// Hash of the settings a fitted codebook depends on; `encode` refuses a
    /// codebook whose hash differs from the current configuration's.
    pub fn fit_hash(&self) -> String {
        hash_json(&serde_json::json!({
            "seed": self.seed,
            "method": self.method,
            "video": self.video,
            "sensor": self.sensor,
            "em": self.em,
        }))
    }
}

fn hash_json(value: &serde_json::Value) -> String {
    // Key order is fixed by the struct definitions and the literal above.
    let text = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parses `"3"`, `"1..5"` (inclusive) or `"2,4,6"`.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::validation(format!("invalid range {s:?}; use N, A..B or A,B,C"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}
