//! Generates the order-only synthetic dataset and writes it to disk in the
//! layout the CLI reads: a manifest, per-clip sensor CSVs and trajectory
//! files.

use egomfv::data::{generate_synthetic, write_dataset, DatasetManifest, SyntheticSpec};

fn main() -> egomfv::Result<()> {
    let spec = SyntheticSpec::order_only();
    let clips = generate_synthetic(&spec, 7)?;
    println!("{} clips, {} channels, {} samples each", clips.len(), spec.channels, spec.length);

    let dir = std::env::temp_dir().join("egomfv-example-dataset");
    let manifest = write_dataset(&spec, &clips, &dir, None)?;
    println!("wrote {}", dir.join("manifest.json").display());

    let reloaded = DatasetManifest::load(dir.join("manifest.json"))?.load_clips()?;
    assert_eq!(reloaded.len(), clips.len());
    for c in &manifest.categories {
        let n = reloaded.iter().filter(|r| r.label == c.id).count();
        println!("  category {} ({}): {n} clips", c.id, c.name);
    }
    Ok(())
}
