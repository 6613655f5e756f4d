//! Synthetic multimodal clips with known structure.
//!
//! Each class is a sequence of equal-length segments. A segment fixes the
//! sensor motif (per-channel sinusoids plus noise) and the video blob
//! (Gaussian cloud in descriptor space) that trajectories starting inside the
//! segment are drawn from. Frame `t` of the video lines up with sensor sample
//! `t`.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{default_channel_names, ClipRecord, Label, SensorStream, TrajectoryDescriptor};
use super::{write_sensor_csv, write_trajectories, Category, ClipEntry, DatasetManifest, MANIFEST_VERSION};
use super::{DEFAULT_CHANNELS, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// Per-channel sinusoid pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub frequency_hz: f64,
    /// One amplitude per channel; zero leaves the channel to noise only.
    pub amplitudes: Vec<f64>,
}

/// Isotropic Gaussian cloud in descriptor space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub mean: Vec<f64>,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub motif: usize,
    pub blob: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPattern {
    pub name: String,
    pub top_level_type: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub channels: usize,
    /// Samples (and frames) per clip.
    pub length: usize,
    pub sample_rate_hz: f64,
    pub descriptor_dim: usize,
    pub clips_per_class: usize,
    pub sensor_noise: f64,
    /// Relative per-clip amplitude jitter.
    pub amplitude_jitter: f64,
    /// Descriptors emitted per frame; zero produces sensor-only clips.
    pub trajectories_per_frame: usize,
    pub motifs: Vec<Motif>,
    pub blobs: Vec<Blob>,
    pub classes: Vec<ClassPattern>,
    /// Every odd-positioned class replays the preceding class's segments in
    /// reverse, so each such pair shares its motif multiset and differs only
    /// in temporal order.
    pub order_only_distinct: bool,
    /// Randomly permute labels across clips after generation.
    pub shuffle_labels: bool,
}

impl SyntheticSpec {
    fn base(classes: Vec<ClassPattern>, motifs: Vec<Motif>, blobs: Vec<Blob>) -> Self {
        SyntheticSpec {
            channels: DEFAULT_CHANNELS,
            length: 150,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            descriptor_dim: 16,
            clips_per_class: 10,
            sensor_noise: 0.1,
            amplitude_jitter: 0.1,
            trajectories_per_frame: 1,
            motifs,
            blobs,
            classes,
            order_only_distinct: false,
            shuffle_labels: false,
        }
    }

    /// Two classes built from the same two motifs, played in opposite order.
    /// Their window statistics match; only the temporal order differs.
    pub fn order_only() -> Self {
        let motifs = two_motifs(DEFAULT_CHANNELS);
        let blobs = blob_grid(2, 16, 4.0, 1.0);
        let forward = vec![
            Segment { motif: 0, blob: 0 },
            Segment { motif: 0, blob: 1 },
            Segment { motif: 1, blob: 0 },
            Segment { motif: 1, blob: 1 },
        ];
        let classes = vec![
            pattern("forward", "Exercise", forward.clone()),
            // Replaced by the reversal of `forward` when generating.
            pattern("reversed", "Exercise", forward),
        ];
        let mut spec = Self::base(classes, motifs, blobs);
        spec.order_only_distinct = true;
        spec
    }

    /// Four classes where identity lives in the pairing of modalities.
    ///
    /// Every class alternates the same two sensor motifs at the same times.
    /// Classes 1 and 2 draw trajectories from blobs 0 and 1, classes 3 and 4
    /// from blobs 2 and 3, but the two members of each pair attach the blobs
    /// to opposite motifs. Neither modality alone separates the members of a
    /// pair.
    pub fn joint_fusion() -> Self {
        let motifs = two_motifs(DEFAULT_CHANNELS);
        let blobs = blob_grid(4, 16, 4.0, 1.0);
        let alternating = |a: usize, b: usize| {
            (0..4)
                .map(|i| Segment {
                    motif: i % 2,
                    blob: if i % 2 == 0 { a } else { b },
                })
                .collect::<Vec<_>>()
        };
        let classes = vec![
            pattern("pair-a-direct", "Daily Activities", alternating(0, 1)),
            pattern("pair-a-crossed", "Daily Activities", alternating(1, 0)),
            pattern("pair-b-direct", "Office Work", alternating(2, 3)),
            pattern("pair-b-crossed", "Office Work", alternating(3, 2)),
        ];
        Self::base(classes, motifs, blobs)
    }

    /// `n` classes with random segment layouts drawn from shared libraries of
    /// motifs and blobs.
    pub fn random_classes(n: usize, layout_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(layout_seed);
        let channels = DEFAULT_CHANNELS;
        let motifs: Vec<Motif> = (0..6)
            .map(|m| Motif {
                frequency_hz: 0.5 + 0.5 * m as f64,
                amplitudes: (0..channels).map(|_| rng.random_range(0.0..1.5)).collect(),
            })
            .collect();
        let blobs = blob_grid(6, 16, 3.0, 1.0);
        let groups = ["Ambulation", "Daily Activities", "Office Work", "Exercise"];
        let classes = (0..n)
            .map(|c| {
                let segments = (0..4)
                    .map(|_| Segment {
                        motif: rng.random_range(0..motifs.len()),
                        blob: rng.random_range(0..blobs.len()),
                    })
                    .collect();
                pattern(&format!("activity-{}", c + 1), groups[c % groups.len()], segments)
            })
            .collect();
        Self::base(classes, motifs, blobs)
    }

    /// Same layout with trajectory descriptors of length `dim`: blob means
    /// are zero-padded or truncated.
    pub fn with_descriptor_dim(mut self, dim: usize) -> Self {
        self.descriptor_dim = dim;
        for b in &mut self.blobs {
            b.mean.resize(dim, 0.0);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::validation("synthetic spec needs at least 2 classes"));
        }
        if self.channels == 0 || self.length == 0 || self.clips_per_class == 0 {
            return Err(Error::validation(
                "channels, length and clips_per_class must be positive",
            ));
        }
        if !(self.sample_rate_hz > 0.0) || !(self.sensor_noise >= 0.0) {
            return Err(Error::validation("invalid sample rate or noise level"));
        }
        if self.trajectories_per_frame > 0 && self.descriptor_dim == 0 {
            return Err(Error::validation("descriptor_dim must be positive"));
        }
        for m in &self.motifs {
            if m.amplitudes.len() != self.channels {
                return Err(Error::validation("motif amplitudes must cover every channel"));
            }
        }
        for b in &self.blobs {
            if b.mean.len() != self.descriptor_dim || !(b.std >= 0.0) {
                return Err(Error::validation("blob mean must match descriptor_dim"));
            }
        }
        for class in &self.classes {
            if class.segments.is_empty() || class.segments.len() > self.length {
                return Err(Error::validation(format!(
                    "class {} needs between 1 and {} segments",
                    class.name, self.length
                )));
            }
            for s in &class.segments {
                if s.motif >= self.motifs.len() || s.blob >= self.blobs.len() {
                    return Err(Error::validation(format!(
                        "class {} references an unknown motif or blob",
                        class.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Segment sequences actually used for generation, after applying
    /// `order_only_distinct`.
    pub fn effective_segments(&self) -> Vec<Vec<Segment>> {
        let mut out: Vec<Vec<Segment>> =
            self.classes.iter().map(|c| c.segments.clone()).collect();
        if self.order_only_distinct {
            for i in (1..out.len()).step_by(2) {
                let mut reversed = out[i - 1].clone();
                reversed.reverse();
                out[i] = reversed;
            }
        }
        out
    }
}

fn pattern(name: &str, group: &str, segments: Vec<Segment>) -> ClassPattern {
    ClassPattern {
        name: name.to_owned(),
        top_level_type: group.to_owned(),
        segments,
    }
}

/// A slow motif on the first half of the channels and a fast one on the rest.
fn two_motifs(channels: usize) -> Vec<Motif> {
    let half = channels / 2;
    vec![
        Motif {
            frequency_hz: 0.8,
            amplitudes: (0..channels).map(|c| if c < half { 1.0 } else { 0.1 }).collect(),
        },
        Motif {
            frequency_hz: 2.2,
            amplitudes: (0..channels).map(|c| if c < half { 0.1 } else { 1.0 }).collect(),
        },
    ]
}

/// `n` blobs whose means sit `spacing` apart along distinct coordinate axes.
fn blob_grid(n: usize, dim: usize, spacing: f64, std: f64) -> Vec<Blob> {
    (0..n)
        .map(|i| {
            let mut mean = vec![0.0; dim];
            mean[i % dim] = spacing;
            Blob { mean, std }
        })
        .collect()
}

/// Segment index covering sample `t` when `length` samples are split into
/// `segments` equal parts.
fn segment_of(t: usize, length: usize, segments: usize) -> usize {
    (t * segments / length).min(segments - 1)
}

/// Generates `clips_per_class` clips per class, deterministically in `seed`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<ClipRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.sensor_noise).map_err(|e| Error::validation(e.to_string()))?;
    let names = default_channel_names(spec.channels);
    let layouts = spec.effective_segments();

    let mut clips = Vec::with_capacity(layouts.len() * spec.clips_per_class);
    for (class_idx, segments) in layouts.iter().enumerate() {
        let label = class_idx as Label + 1;
        for clip_idx in 0..spec.clips_per_class {
            let clip_id = format!("c{:02}_{:02}", label, clip_idx);
            let phases: Vec<f64> = (0..spec.channels).map(|_| rng.random_range(0.0..TAU)).collect();
            let gains: Vec<f64> = (0..spec.channels)
                .map(|_| 1.0 + spec.amplitude_jitter * rng.random_range(-1.0..1.0))
                .collect();

            let mut samples = Array2::zeros((spec.length, spec.channels));
            for t in 0..spec.length {
                let motif = &spec.motifs[segments[segment_of(t, spec.length, segments.len())].motif];
                let time = t as f64 / spec.sample_rate_hz;
                for c in 0..spec.channels {
                    let wave = (TAU * motif.frequency_hz * time + phases[c]).sin();
                    samples[[t, c]] = gains[c] * motif.amplitudes[c] * wave + noise.sample(&mut rng);
                }
            }
            let sensor = SensorStream::new(
                clip_id.clone(),
                spec.sample_rate_hz,
                samples,
                names.clone(),
            )?;

            let mut trajectories =
                Vec::with_capacity(spec.length * spec.trajectories_per_frame);
            for t in 0..spec.length {
                let blob = &spec.blobs[segments[segment_of(t, spec.length, segments.len())].blob];
                for _ in 0..spec.trajectories_per_frame {
                    let vector = blob
                        .mean
                        .iter()
                        .map(|&m| m + blob.std * rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect();
                    trajectories.push(TrajectoryDescriptor {
                        start_frame: t,
                        vector,
                    });
                }
            }

            clips.push(ClipRecord {
                clip_id,
                label,
                sensor,
                trajectories,
            });
        }
    }

    if spec.shuffle_labels {
        let mut labels: Vec<Label> = clips.iter().map(|c| c.label).collect();
        labels.shuffle(&mut rng);
        for (clip, label) in clips.iter_mut().zip(labels) {
            clip.label = label;
        }
    }
    Ok(clips)
}

/// Writes clips as a dataset directory: `manifest.json`, `sensor/<id>.csv`
/// and `trajectories/<id>.csv`. `extra_notes` is appended to the manifest
/// notes, which also describe the order-only construction when it is used.
pub fn write_dataset(
    spec: &SyntheticSpec,
    clips: &[ClipRecord],
    dir: &Path,
    extra_notes: Option<&str>,
) -> Result<DatasetManifest> {
    for sub in ["sensor", "trajectories"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut entries = Vec::with_capacity(clips.len());
    for clip in clips {
        let sensor_path = PathBuf::from("sensor").join(format!("{}.csv", clip.clip_id));
        write_sensor_csv(&clip.sensor, dir.join(&sensor_path))?;
        let trajectory_path = PathBuf::from("trajectories").join(format!("{}.csv", clip.clip_id));
        write_trajectories(&clip.trajectories, spec.descriptor_dim, dir.join(&trajectory_path))?;
        entries.push(ClipEntry {
            clip_id: clip.clip_id.clone(),
            label: clip.label,
            sensor_path,
            trajectory_path: Some(trajectory_path),
            video_frames: None,
        });
    }
    let mut notes = vec![format!("synthetic: {} classes x {} clips", spec.classes.len(), spec.clips_per_class)];
    if spec.order_only_distinct {
        notes.push(
            "order-only construction: every class uses the same motifs and blobs, only their segment order differs"
                .to_owned(),
        );
    }
    if spec.shuffle_labels {
        notes.push("labels shuffled against content".to_owned());
    }
    notes.extend(extra_notes.map(str::to_owned));
    let manifest = DatasetManifest {
        manifest_version: MANIFEST_VERSION,
        channels: spec.channels,
        categories: spec
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| Category {
                id: i as Label + 1,
                name: c.name.clone(),
                top_level_type: c.top_level_type.clone(),
            })
            .collect(),
        clips: entries,
        notes: Some(notes.join("; ")),
        base_dir: dir.to_path_buf(),
    };
    manifest.validate()?;
    manifest.save(dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn small(mut spec: SyntheticSpec) -> SyntheticSpec {
        spec.clips_per_class = 10;
        spec.length = 150;
        spec
    }

    #[test]
    fn deterministic_for_equal_seed() {
        let spec = small(SyntheticSpec::order_only());
        let a = generate_synthetic(&spec, 7).unwrap();
        let b = generate_synthetic(&spec, 7).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.sensor.len() == 150));
    }

    #[test]
    fn seed_changes_values_not_shapes() {
        let spec = small(SyntheticSpec::order_only());
        let a = generate_synthetic(&spec, 1).unwrap();
        let b = generate_synthetic(&spec, 2).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sensor.samples.dim(), y.sensor.samples.dim());
            assert_eq!(x.trajectories.len(), y.trajectories.len());
            assert_ne!(x.sensor.samples, y.sensor.samples);
        }
    }

    #[test]
    fn order_only_classes_share_motif_multiset() {
        let spec = SyntheticSpec::order_only();
        let layouts = spec.effective_segments();
        let motifs = |segs: &[Segment]| segs.iter().map(|s| s.motif).collect::<Vec<_>>();
        let histogram = |segs: &[Segment]| {
            let mut h: HashMap<usize, usize> = HashMap::new();
            for s in segs {
                *h.entry(s.motif).or_default() += 1;
            }
            h
        };
        assert_eq!(histogram(&layouts[0]), histogram(&layouts[1]));
        let mut reversed = motifs(&layouts[0]);
        reversed.reverse();
        assert_eq!(motifs(&layouts[1]), reversed);
        assert_ne!(motifs(&layouts[0]), motifs(&layouts[1]));
    }

    #[test]
    fn labels_are_balanced_and_frames_aligned() {
        let spec = SyntheticSpec::joint_fusion();
        let clips = generate_synthetic(&spec, 3).unwrap();
        let mut counts: HashMap<Label, usize> = HashMap::new();
        for c in &clips {
            *counts.entry(c.label).or_default() += 1;
            assert!(c.trajectories.iter().all(|t| t.start_frame < c.sensor.len()));
        }
        assert_eq!(counts.len(), 4);
        assert!(counts.values().all(|&n| n == 10));
    }

    #[test]
    fn fewer_than_two_classes_rejected() {
        let mut spec = SyntheticSpec::order_only();
        spec.classes.truncate(1);
        assert!(matches!(generate_synthetic(&spec, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn shuffled_labels_stay_balanced() {
        let mut spec = SyntheticSpec::random_classes(5, 11);
        spec.shuffle_labels = true;
        spec.trajectories_per_frame = 0;
        let clips = generate_synthetic(&spec, 4).unwrap();
        let mut counts: HashMap<Label, usize> = HashMap::new();
        for c in &clips {
            *counts.entry(c.label).or_default() += 1;
        }
        assert!(counts.values().all(|&n| n == 10));
        let identity = clips
            .iter()
            .all(|c| c.clip_id.starts_with(&format!("c{:02}", c.label)));
        assert!(!identity);
    }
}
