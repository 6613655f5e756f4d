//! Window size by cluster count study for the sensor-only methods.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::data::ClipRecord;
use crate::error::Result;
use crate::pipeline::evaluate;

pub const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    /// The parameters cannot produce features (e.g. a one-sample
    /// displacement window).
    Invalid,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: String,
    pub window: usize,
    pub clusters: usize,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub methods: Vec<String>,
    pub windows: Vec<usize>,
    pub clusters: Vec<usize>,
    /// One cell per (method, window, clusters), methods outermost, then
    /// windows, then clusters.
    pub cells: Vec<SweepCell>,
}

/// Cross-validates FVS and TFVS for every window size and cluster count.
/// Parameter combinations that cannot run are kept as invalid cells.
pub fn run_sweep(base: &RunConfig, clips: &[ClipRecord], windows: &[usize], clusters: &[usize]) -> Result<SweepReport> {
    let methods = [Method::Fvs, Method::Tfvs];
    let grid: Vec<(Method, usize, usize)> = methods
        .iter()
        .flat_map(|&m| windows.iter().flat_map(move |&w| clusters.iter().map(move |&k| (m, w, k))))
        .collect();
    let cells = grid
        .into_par_iter()
        .map(|(method, window, k)| {
            let mut config = base.clone();
            config.method = method;
            config.sensor.window = window;
            config.sensor.clusters = k;
            let cell = |status, accuracy, reason| SweepCell {
                method: method.display_name().to_owned(),
                window,
                clusters: k,
                status,
                accuracy,
                reason,
            };
            if let Err(e) = config.validate() {
                return cell(CellStatus::Invalid, None, Some(e.to_string()));
            }
            match evaluate(&config, clips) {
                Ok(r) => cell(CellStatus::Ok, Some(r.overall_accuracy), None),
                Err(e) => cell(CellStatus::Failed, None, Some(e.to_string())),
            }
        })
        .collect();
    Ok(SweepReport {
        schema_version: SWEEP_SCHEMA_VERSION,
        config_hash: base.config_hash(),
        seed: base.seed,
        methods: methods.iter().map(|m| m.display_name().to_owned()).collect(),
        windows: windows.to_vec(),
        clusters: clusters.to_vec(),
        cells,
    })
}

impl SweepReport {
    pub fn cell(&self, method: &str, window: usize, clusters: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.window == window && c.clusters == clusters)
    }

    /// One grid per method: rows are window sizes, columns cluster counts,
    /// entries accuracy in percent (`-` where the cell did not run).
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for method in &self.methods {
            let _ = writeln!(out, "{method} accuracy (%), rows w, columns k");
            let _ = write!(out, "{:>6}", "w\\k");
            for k in &self.clusters {
                let _ = write!(out, "{k:>8}");
            }
            out.push('\n');
            for &w in &self.windows {
                let _ = write!(out, "{w:>6}");
                for &k in &self.clusters {
                    match self.cell(method, w, k).and_then(|c| c.accuracy) {
                        Some(a) => {
                            let _ = write!(out, "{:>8.2}", 100.0 * a);
                        }
                        None => {
                            let _ = write!(out, "{:>8}", "-");
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}
