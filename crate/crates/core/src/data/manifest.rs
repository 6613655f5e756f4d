use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_sensor_csv, load_trajectories, ClipRecord, Label, DEFAULT_CHANNELS};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: Label,
    pub name: String,
    /// Coarse grouping such as "Ambulation" or "Office Work".
    #[serde(default)]
    pub top_level_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    pub label: Label,
    pub sensor_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_path: Option<PathBuf>,
    /// Number of video frames, when known. The sensor stream is truncated to
    /// the shorter of the two modalities and later trajectories are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_frames: Option<usize>,
}

/// Dataset manifest. Relative paths resolve against the manifest's directory.
///
/// ```json
/// {
///   "manifest_version": 1,
///   "channels": 19,
///   "categories": [{"id": 1, "name": "walking", "top_level_type": "Ambulation"}],
///   "clips": [{"clip_id": "c0", "label": 1,
///              "sensor_path": "sensor/c0.csv", "trajectory_path": "traj/c0.csv"}]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub manifest_version: u32,
    #[serde(default = "default_channels")]
    pub channels: usize,
    pub categories: Vec<Category>,
    pub clips: Vec<ClipEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_channels() -> usize {
    DEFAULT_CHANNELS
}

impl DatasetManifest {
    /// Parses and validates a manifest. Fails atomically with the full list
    /// of referenced files that do not exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        let missing: Vec<PathBuf> = manifest
            .clips
            .iter()
            .flat_map(|c| std::iter::once(&c.sensor_path).chain(c.trajectory_path.as_ref()))
            .map(|p| manifest.resolve(p))
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifest_version != MANIFEST_VERSION {
            return Err(Error::validation(format!(
                "unsupported manifest_version {}",
                self.manifest_version
            )));
        }
        for (i, cat) in self.categories.iter().enumerate() {
            if cat.id as usize != i + 1 {
                return Err(Error::validation(format!(
                    "category ids must be unique and contiguous from 1; position {} has id {}",
                    i + 1,
                    cat.id
                )));
            }
        }
        let mut seen = HashSet::new();
        for clip in &self.clips {
            if !seen.insert(clip.clip_id.as_str()) {
                return Err(Error::validation(format!("duplicate clip id {}", clip.clip_id)));
            }
            if clip.label == 0 || clip.label as usize > self.categories.len() {
                return Err(Error::validation(format!(
                    "clip {} has label {} outside the category list",
                    clip.clip_id, clip.label
                )));
            }
        }
        Ok(())
    }

    pub fn category_name(&self, id: Label) -> Option<&str> {
        self.categories
            .get((id as usize).checked_sub(1)?)
            .map(|c| c.name.as_str())
    }

    /// Loads every clip referenced by the manifest.
    pub fn load_clips(&self) -> Result<Vec<ClipRecord>> {
        use rayon::prelude::*;
        self.clips
            .par_iter()
            .map(|entry| self.load_clip(entry))
            .collect()
    }

    fn load_clip(&self, entry: &ClipEntry) -> Result<ClipRecord> {
        let mut sensor = load_sensor_csv(self.resolve(&entry.sensor_path), self.channels)?;
        sensor.clip_id = entry.clip_id.clone();
        let mut trajectories = match &entry.trajectory_path {
            Some(p) => load_trajectories(self.resolve(p))?,
            None => Vec::new(),
        };
        if let Some(frames) = entry.video_frames {
            let len = frames.min(sensor.len());
            if len == 0 {
                return Err(Error::validation(format!("clip {} has no frames", entry.clip_id)));
            }
            sensor = sensor.truncated(len);
            trajectories.retain(|t| t.start_frame < len);
        }
        Ok(ClipRecord {
            clip_id: entry.clip_id.clone(),
            label: entry.label,
            sensor,
            trajectories,
        })
    }
}
