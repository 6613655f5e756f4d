use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal-component projection fit on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `input_dim x output_dim`, orthonormal columns sorted by decreasing
    /// variance; each column's largest-magnitude entry is positive.
    pub basis: Array2<f64>,
    pub explained_variance: Array1<f64>,
}

/// Half the input dimensionality, rounded up.
pub fn half_dim(input_dim: usize) -> usize {
    input_dim.div_ceil(2)
}

/// Fits a PCA keeping `target_dim` components of the sample covariance
/// (denominator `N - 1`).
pub fn fit_pca(data: ArrayView2<f64>, target_dim: usize) -> Result<PcaModel> {
    let (n, dim) = data.dim();
    if n == 0 || dim == 0 {
        return Err(Error::validation("PCA needs at least one row and one column"));
    }
    if target_dim == 0 || target_dim > dim {
        return Err(Error::validation(format!(
            "PCA target dimension {target_dim} must be in 1..={dim}"
        )));
    }
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let centered = &data - &mean;
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = centered.t().dot(&centered) / denom;

    let eig = SymmetricEigen::new(DMatrix::from_fn(dim, dim, |r, c| cov[[r, c]]));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut basis = Array2::zeros((dim, target_dim));
    let mut explained_variance = Array1::zeros(target_dim);
    for (j, &src) in order.iter().take(target_dim).enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..dim {
            basis[[r, j]] = sign * col[r];
        }
        explained_variance[j] = eig.eigenvalues[src].max(0.0);
    }
    Ok(PcaModel {
        mean,
        basis,
        explained_variance,
    })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn transform(&self, data: ArrayView2<f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.input_dim() {
            return Err(Error::validation(format!(
                "PCA expects {} columns, got {}",
                self.input_dim(),
                data.ncols()
            )));
        }
        Ok((&data - &self.mean).dot(&self.basis))
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::validation("PCA input dimension mismatch"));
        }
        Ok((&x - &self.mean).dot(&self.basis))
    }

    pub fn inverse_transform(&self, reduced: ArrayView2<f64>) -> Array2<f64> {
        reduced.dot(&self.basis.t()) + &self.mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn exact_subspace_reconstructs() {
        let coeffs = random(40, 2, 1);
        let plane = random(2, 5, 2);
        let data = coeffs.dot(&plane) + 3.0;
        let pca = fit_pca(data.view(), 2).unwrap();
        let back = pca.inverse_transform(pca.transform(data.view()).unwrap().view());
        let err = (&back - &data).mapv(f64::abs).fold(0.0_f64, |a, &b| a.max(b));
        assert!(err < 1e-9, "reconstruction error {err}");
    }

    #[test]
    fn full_rank_projection_is_isometry() {
        let data = random(25, 6, 3);
        let pca = fit_pca(data.view(), 6).unwrap();
        let z = pca.transform(data.view()).unwrap();
        let gram = pca.basis.t().dot(&pca.basis);
        for ((r, c), v) in gram.indexed_iter() {
            let expect = if r == c { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-9);
        }
        for i in 0..25 {
            for j in 0..i {
                let a = (&data.row(i) - &data.row(j)).mapv(|v| v * v).sum().sqrt();
                let b = (&z.row(i) - &z.row(j)).mapv(|v| v * v).sum().sqrt();
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sign_convention_and_ordering() {
        let data = random(60, 8, 4);
        let pca = fit_pca(data.view(), 4).unwrap();
        for col in pca.basis.columns() {
            let pivot = col.iter().copied().fold(0.0_f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(pivot > 0.0);
        }
        assert!(pca.explained_variance.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn dimension_errors() {
        let data = random(10, 3, 5);
        assert!(fit_pca(data.view(), 4).is_err());
        assert!(fit_pca(data.view(), 0).is_err());
        // Rank-deficient targets are allowed.
        assert!(fit_pca(data.slice(ndarray::s![..2, ..]), 3).is_ok());
        assert_eq!(half_dim(19), 10);
        assert_eq!(half_dim(38), 19);
    }
}
