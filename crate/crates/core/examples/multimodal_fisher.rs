//! Fits the full multimodal model on the joint-fusion synthetic data and
//! encodes one clip under every method, showing the vector lengths.

use egomfv::config::{Method, RunConfig};
use egomfv::data::{generate_synthetic, SyntheticSpec};
use egomfv::pipeline::{encode_clip, fit_model, usable_clips};

fn main() -> egomfv::Result<()> {
    let mut spec = SyntheticSpec::joint_fusion();
    spec.clips_per_class = 4;
    let clips = generate_synthetic(&spec, 1)?;

    for method in Method::ALL {
        let config = RunConfig {
            method,
            video: egomfv::config::VideoConfig {
                gaussians: 4,
                ..Default::default()
            },
            ..Default::default()
        };
        let (usable, _) = usable_clips(method, &clips);
        let model = fit_model(&config, &usable)?;
        let v = encode_clip(&model, usable[0])?;
        println!("{:>16}: length {:>5}, norm {:.3}", method.display_name(), v.len(), v.dot(&v).sqrt());
    }
    Ok(())
}
