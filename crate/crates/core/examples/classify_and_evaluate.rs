//! Cross-validates TFVS and FVS on the order-only data with per-fold
//! codebooks, prints the accuracy table and the TFVS confusion matrix.

use egomfv::classify::render_table;
use egomfv::config::{Method, RunConfig};
use egomfv::data::{generate_synthetic, SyntheticSpec};
use egomfv::pipeline::evaluate;

fn main() -> egomfv::Result<()> {
    let clips = generate_synthetic(&SyntheticSpec::order_only(), 0)?;
    let mut reports = Vec::new();
    for method in [Method::Fvs, Method::Tfvs] {
        let mut config = RunConfig {
            method,
            ..Default::default()
        };
        config.classifier.folds = 5;
        reports.push(evaluate(&config, &clips)?);
    }
    print!("{}", render_table(&reports));
    println!();
    print!("{}", reports[1].confusion_csv());
    Ok(())
}
