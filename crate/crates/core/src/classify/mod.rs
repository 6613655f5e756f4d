//! Linear one-vs-rest classification, the statistics baseline and the
//! cross-validation harness.

pub mod eval;
pub mod stats;
pub mod svm;

pub use eval::{cross_validate, render_table, EncodedClip, EvalReport, SplitMode};
pub use stats::stat_features;
pub use svm::{train_ovr, LinearOvrModel};
