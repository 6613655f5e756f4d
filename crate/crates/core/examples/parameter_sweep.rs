//! Sweeps window length and cluster count for FVS and TFVS on a small
//! dataset and prints the accuracy grids.

use egomfv::config::RunConfig;
use egomfv::data::{generate_synthetic, SyntheticSpec};
use egomfv::sweep::run_sweep;

fn main() -> egomfv::Result<()> {
    let mut spec = SyntheticSpec::order_only();
    spec.clips_per_class = 6;
    let clips = generate_synthetic(&spec, 2)?;
    let mut base = RunConfig::default();
    base.classifier.folds = 3;
    let report = run_sweep(&base, &clips, &[1, 2, 3], &[2, 4])?;
    print!("{}", report.render_text());
    Ok(())
}
