//! Turns one sensor stream into windowed features, tags each window with its
//! stage, and shows how the order column is appended after PCA.

use egomfv::fisher::{reduce_sensor_features, sensor_windows, SensorFeatureParams};
use egomfv::pca::{fit_pca, half_dim};
use egomfv::sensor::WindowMode;
use egomfv::data::SensorStream;
use ndarray::Array2;

fn main() -> egomfv::Result<()> {
    // Two channels, 12 samples: a ramp and a slow oscillation.
    let samples = Array2::from_shape_fn((12, 2), |(t, c)| match c {
        0 => t as f64,
        _ => (t as f64 * 0.7).sin(),
    });
    let stream = SensorStream::from_samples("demo", samples)?;

    let params = SensorFeatureParams {
        window: 3,
        stages: 4,
        mode: WindowMode::Displacement,
        temporal: true,
    };
    let (windows, orders) = sensor_windows(&stream, &params)?;
    println!("{} windows of dim {}", windows.nrows(), windows.ncols());
    for (i, (row, order)) in windows.rows().into_iter().zip(&orders).enumerate().take(4) {
        println!("  window {i}: {row} order {order}");
    }

    let pca = fit_pca(windows.view(), half_dim(windows.ncols()))?;
    let features = reduce_sensor_features(windows.view(), &orders, Some(&pca), true)?;
    println!("after PCA and order: {} columns", features.ncols());
    println!("last column: {}", features.column(features.ncols() - 1));
    Ok(())
}
