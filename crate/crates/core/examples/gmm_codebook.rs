//! Fits a diagonal GMM with EM and prints the log-likelihood trace, which
//! never decreases.

use egomfv::gmm::{fit_gmm, EmOptions};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> egomfv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let centres = [[-3.0, 0.0], [3.0, 0.0], [0.0, 4.0]];
    let data = Array2::from_shape_fn((600, 2), |(r, c)| centres[r % 3][c] + noise.sample(&mut rng));

    let gmm = fit_gmm(data.view(), 3, 0, &EmOptions::default())?;
    for i in 0..gmm.components() {
        println!("component {i}: weight {:.3} mean {:.2}", gmm.weights[i], gmm.means.row(i));
    }
    let meta = gmm.meta.as_ref().expect("fit records its trace");
    println!("{} iterations, converged {}", meta.iterations, meta.converged);
    for (i, ll) in meta.log_likelihood_trace.iter().enumerate().take(8) {
        println!("  iter {i}: {ll:.6}");
    }
    println!("codebook hash {}", gmm.content_hash());
    Ok(())
}
