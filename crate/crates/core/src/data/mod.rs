//! Domain types and ingestion: sensor streams, precomputed trajectory
//! descriptors, dataset manifests and the synthetic multimodal generator.

mod io;
mod manifest;
pub mod synth;

pub use io::{load_sensor_csv, load_trajectories, write_sensor_csv, write_trajectories};
pub use manifest::{Category, ClipEntry, DatasetManifest, MANIFEST_VERSION};
pub use synth::{generate_synthetic, write_dataset, SyntheticSpec};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample rate of the wearable recordings; video runs at the same 10 fps.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10.0;
/// Accelerometer, gravity, gyroscope, linear acceleration, magnetic field and
/// rotation vector streams add up to 19 channels.
pub const DEFAULT_CHANNELS: usize = 19;

/// Category identifier, 1-based.
pub type Label = u32;

/// Multichannel time series for one clip, stored as an `L x C` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorStream {
    pub clip_id: String,
    pub sample_rate_hz: f64,
    pub samples: Array2<f64>,
    pub channel_names: Vec<String>,
}

impl SensorStream {
    pub fn new(
        clip_id: impl Into<String>,
        sample_rate_hz: f64,
        samples: Array2<f64>,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        let stream = SensorStream {
            clip_id: clip_id.into(),
            sample_rate_hz,
            samples,
            channel_names,
        };
        stream.validate()?;
        Ok(stream)
    }

    /// Builds a stream with generated channel names `ch0..ch{C-1}`.
    pub fn from_samples(clip_id: impl Into<String>, samples: Array2<f64>) -> Result<Self> {
        let names = default_channel_names(samples.ncols());
        Self::new(clip_id, DEFAULT_SAMPLE_RATE_HZ, samples, names)
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::validation(format!(
                "clip {}: sample rate must be positive, got {}",
                self.clip_id, self.sample_rate_hz
            )));
        }
        if self.samples.nrows() == 0 {
            return Err(Error::validation(format!(
                "clip {}: sensor stream has no samples",
                self.clip_id
            )));
        }
        if self.channel_names.len() != self.samples.ncols() {
            return Err(Error::validation(format!(
                "clip {}: {} channel names for {} channels",
                self.clip_id,
                self.channel_names.len(),
                self.samples.ncols()
            )));
        }
        if let Some(((row, col), _)) = self.samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::validation(format!(
                "clip {}: non-finite sample at row {row}, channel {col}",
                self.clip_id
            )));
        }
        Ok(())
    }

    /// Truncates the stream to its first `len` samples.
    pub fn truncated(&self, len: usize) -> SensorStream {
        let len = len.min(self.len());
        SensorStream {
            clip_id: self.clip_id.clone(),
            sample_rate_hz: self.sample_rate_hz,
            samples: self.samples.slice(ndarray::s![..len, ..]).to_owned(),
            channel_names: self.channel_names.clone(),
        }
    }
}

pub fn default_channel_names(channels: usize) -> Vec<String> {
    (0..channels).map(|c| format!("ch{c}")).collect()
}

/// One precomputed video trajectory descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDescriptor {
    /// Frame index at 10 fps; frame `i` is aligned with sensor sample `i`.
    pub start_frame: usize,
    pub vector: Vec<f64>,
}

/// One dataset item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub label: Label,
    pub sensor: SensorStream,
    /// Empty for sensor-only data.
    pub trajectories: Vec<TrajectoryDescriptor>,
}

impl ClipRecord {
    pub fn has_trajectories(&self) -> bool {
        !self.trajectories.is_empty()
    }

    /// Raw descriptor dimensionality, if the clip has any trajectories.
    pub fn descriptor_dim(&self) -> Option<usize> {
        self.trajectories.first().map(|t| t.vector.len())
    }
}
