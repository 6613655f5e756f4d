//! Encodes sensor clips as FVS and TFVS against codebooks fit on the
//! order-only data. The two classes share their window statistics, so FVS
//! class centroids sit close together while TFVS pulls them apart.

use egomfv::data::{generate_synthetic, SyntheticSpec};
use egomfv::fisher::{encode_fv, encode_sensor_fv, normalize_fv, sensor_features, SensorFeatureParams};
use egomfv::gmm::{fit_gmm, EmOptions};
use ndarray::{Array1, Axis};

fn main() -> egomfv::Result<()> {
    let clips = generate_synthetic(&SyntheticSpec::order_only(), 0)?;

    for temporal in [false, true] {
        let params = SensorFeatureParams {
            temporal,
            ..SensorFeatureParams::default()
        };
        let feats = clips
            .iter()
            .map(|c| sensor_features(&c.sensor, None, &params))
            .collect::<egomfv::Result<Vec<_>>>()?;
        let views: Vec<_> = feats.iter().map(|f| f.view()).collect();
        let train = ndarray::concatenate(Axis(0), &views).unwrap();
        let gmm = fit_gmm(train.view(), 4, 0, &EmOptions::default())?;

        let mut centroids = [None, None];
        for label in [1, 2] {
            let fvs = clips
                .iter()
                .filter(|c| c.label == label)
                .map(|c| encode_sensor_fv(&c.sensor, None, &gmm, &params).map(|f| f.values))
                .collect::<egomfv::Result<Vec<Array1<f64>>>>()?;
            let n = fvs.len() as f64;
            let sum = fvs.iter().fold(Array1::<f64>::zeros(fvs[0].len()), |acc, v| acc + v);
            centroids[label as usize - 1] = Some(sum / n);
        }
        let [a, b] = centroids.map(Option::unwrap);
        let gap = (&a - &b).mapv(|v| v * v).sum().sqrt();
        let name = if temporal { "TFVS" } else { "FVS" };
        println!("{name}: length {}, class centroid distance {gap:.4}", a.len());
    }

    // Encoding the training set against its own MLE gives a near-zero score;
    // a single clip does not.
    let params = SensorFeatureParams::default();
    let feats = sensor_features(&clips[0].sensor, None, &params)?;
    let gmm = fit_gmm(feats.view(), 2, 0, &EmOptions::default())?;
    let own = encode_fv(&gmm, feats.view())?;
    let other = encode_fv(&gmm, sensor_features(&clips[15].sensor, None, &params)?.view())?;
    println!("raw norm on own data {:.2e}, on another clip {:.4}", own.norm(), other.norm());
    println!("normalized norm {:.4}", normalize_fv(&other)?.norm());
    Ok(())
}
