//! Multimodal Fisher vector pipeline for egocentric activity recognition.
//!
//! Sensor streams become trajectory-like window features tagged with their
//! temporal stage; video trajectory descriptors are ingested precomputed.
//! Both are encoded as Fisher vectors over Gaussian mixture codebooks, fused
//! under a joint generative model, and classified with one-vs-rest linear
//! SVMs.

pub mod classify;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod fisher;
pub mod gmm;
pub mod mfv;
pub mod pca;
pub mod pipeline;
pub mod sensor;
pub mod sweep;

pub use error::{Error, Result};
