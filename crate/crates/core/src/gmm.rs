//! Diagonal-covariance Gaussian mixtures.
//!
//! EM with k-means++ seeding, log-space posteriors, and the single Gaussians
//! used as per-cluster sensor models in the multimodal codebook.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CODEBOOK_FORMAT_VERSION: u32 = 1;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const CHUNK_ROWS: usize = 512;
/// Weight given to a component whose responsibilities vanished.
const MIN_WEIGHT: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iters: usize,
    /// Relative change of the mean log-likelihood that counts as converged.
    pub tol: f64,
    /// Variance floor as a fraction of the per-dimension data variance.
    pub variance_floor_ratio: f64,
    pub min_variance: f64,
    /// Fraction of rows EM is trained on.
    pub subsample_fraction: f64,
    /// Lower bound on the subsample size (capped at the row count).
    pub min_subsample: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: 200,
            tol: 1e-6,
            variance_floor_ratio: 1e-4,
            min_variance: 1e-10,
            subsample_fraction: 1.0,
            min_subsample: 0,
        }
    }
}

impl EmOptions {
    /// Per-dimension variance floor for `data`.
    pub fn variance_floor(&self, data: ArrayView2<f64>) -> Array1<f64> {
        let var = if data.nrows() > 0 {
            data.var_axis(Axis(0), 0.0)
        } else {
            Array1::zeros(data.ncols())
        };
        var.mapv(|v| (self.variance_floor_ratio * v).max(self.min_variance))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub components: usize,
    pub variance_floor: Array1<f64>,
    pub data_hash: String,
    pub training_rows: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Mean log-likelihood of the training rows after each parameter update,
    /// starting with the initialization.
    pub log_likelihood_trace: Vec<f64>,
}

/// K-component diagonal Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmCodebook {
    pub format_version: u32,
    /// Mixture weights, softmax of `alphas`.
    pub weights: Array1<f64>,
    pub alphas: Array1<f64>,
    /// `K x D`.
    pub means: Array2<f64>,
    /// `K x D` per-dimension variances.
    pub variances: Array2<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<TrainingMeta>,
}

impl GmmCodebook {
    pub fn from_parts(weights: Array1<f64>, means: Array2<f64>, variances: Array2<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.nrows() != k || variances.dim() != means.dim() || means.ncols() == 0 {
            return Err(Error::validation("inconsistent mixture parameter shapes"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::validation("mixture weights must be positive"));
        }
        if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::validation("variances must be positive"));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("means must be finite"));
        }
        let total = weights.sum();
        let weights = weights / total;
        let alphas = weights.mapv(f64::ln);
        Ok(GmmCodebook {
            format_version: CODEBOOK_FORMAT_VERSION,
            weights,
            alphas,
            means,
            variances,
            meta: None,
        })
    }

    /// Builds a mixture from unconstrained weight parameters.
    pub fn from_alphas(alphas: Array1<f64>, means: Array2<f64>, variances: Array2<f64>) -> Result<Self> {
        let weights = softmax(alphas.view());
        let mut gmm = Self::from_parts(weights, means, variances)?;
        gmm.alphas = alphas;
        Ok(gmm)
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    fn check_dim(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::validation(format!(
                "feature has {} dims, codebook expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `log θ_i + log N(x; μ_i, Σ_i)` for every component.
    pub fn log_joint(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let log_weights = log_softmax(self.alphas.view());
        Array1::from_shape_fn(self.components(), |i| {
            log_weights[i] + log_gaussian(x, self.means.row(i), self.variances.row(i))
        })
    }

    pub fn log_likelihood(&self, x: ArrayView1<f64>) -> f64 {
        log_sum_exp(self.log_joint(x).view())
    }

    pub fn mean_log_likelihood(&self, data: ArrayView2<f64>) -> f64 {
        data.rows().into_iter().map(|x| self.log_likelihood(x)).sum::<f64>() / data.nrows() as f64
    }

    /// Posterior `p(ω = i | x)` for every component.
    pub fn responsibilities(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature contains non-finite values"));
        }
        Ok(normalize_log(self.log_joint(x)))
    }

    /// Index of the most responsible component; ties go to the lowest index.
    pub fn hard_assign(&self, x: ArrayView1<f64>) -> Result<usize> {
        Ok(argmax_first(self.responsibilities(x)?.view()))
    }

    /// Short content hash over the parameters.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for a in [&self.alphas.view(), &self.weights.view()] {
            hash_values(&mut h, a.iter().copied());
        }
        hash_values(&mut h, self.means.iter().copied());
        hash_values(&mut h, self.variances.iter().copied());
        hex::encode(h.finalize())
    }
}

pub(crate) fn hash_values(h: &mut Sha256, values: impl Iterator<Item = f64>) {
    for v in values {
        h.update(v.to_le_bytes());
    }
}

/// SHA-256 over the shape and little-endian values of a matrix.
pub fn data_hash(data: ArrayView2<f64>) -> String {
    let mut h = Sha256::new();
    h.update((data.nrows() as u64).to_le_bytes());
    h.update((data.ncols() as u64).to_le_bytes());
    hash_values(&mut h, data.iter().copied());
    hex::encode(h.finalize())
}

pub fn log_gaussian(x: ArrayView1<f64>, mean: ArrayView1<f64>, var: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for ((&xv, &m), &v) in x.iter().zip(mean).zip(var) {
        let d = xv - m;
        acc += LN_2PI + v.ln() + d * d / v;
    }
    -0.5 * acc
}

pub fn log_sum_exp(v: ArrayView1<f64>) -> f64 {
    let max = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(v: ArrayView1<f64>) -> Array1<f64> {
    normalize_log(v.to_owned())
}

fn log_softmax(v: ArrayView1<f64>) -> Array1<f64> {
    let lse = log_sum_exp(v);
    v.mapv(|a| a - lse)
}

/// Exponentiates and normalizes log-weights; the sum is renormalized so it
/// lands within rounding of 1.
pub(crate) fn normalize_log(mut v: Array1<f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    v.mapv_inplace(|a| (a - max).exp());
    let total = v.sum();
    v /= total;
    v
}

/// Index of the first maximal entry.
pub fn argmax_first(q: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Fits a `k`-component diagonal GMM by EM.
///
/// Rows are subsampled per `opts`, seeded with k-means++, then refined until
/// the relative change in mean log-likelihood drops below `opts.tol` or
/// `opts.max_iters` is reached. All randomness comes from `seed`.
pub fn fit_gmm(data: ArrayView2<f64>, k: usize, seed: u64, opts: &EmOptions) -> Result<GmmCodebook> {
    let (n, dim) = data.dim();
    if k == 0 {
        return Err(Error::validation("component count must be positive"));
    }
    if dim == 0 {
        return Err(Error::validation("data has no columns"));
    }
    if n < k {
        return Err(Error::validation(format!("{n} rows cannot support {k} components")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("training data contains non-finite values"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = subsample(data, k, opts, &mut rng);
    let train = train.view();
    let floor = opts.variance_floor(data);
    let global_var = train.var_axis(Axis(0), 0.0);

    let centers = kmeans_pp(train, k, &mut rng);
    let mut means = Array2::zeros((k, dim));
    for (i, &c) in centers.iter().enumerate() {
        means.row_mut(i).assign(&train.row(c));
    }
    let init_var = ndarray::Zip::from(&global_var)
        .and(&floor)
        .map_collect(|&v, &f| v.max(f));
    let mut variances = Array2::from_shape_fn((k, dim), |(_, d)| init_var[d]);
    let mut weights = Array1::from_elem(k, 1.0 / k as f64);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut resp = Array2::zeros((train.nrows(), k));
    loop {
        let ll = e_step(train, &weights, &means, &variances, &mut resp);
        if !ll.is_finite() {
            return Err(Error::numerical("log-likelihood became non-finite during EM"));
        }
        if let Some(&prev) = trace.last() {
            let change = (ll - prev) / f64::max(f64::abs(prev), 1e-300);
            if change.abs() < opts.tol {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || iterations == opts.max_iters {
            break;
        }
        m_step(train, resp.view(), &floor, &mut weights, &mut means, &mut variances);
        iterations += 1;
    }

    let mut gmm = GmmCodebook::from_parts(weights, means, variances)?;
    gmm.meta = Some(TrainingMeta {
        seed,
        components: k,
        variance_floor: floor,
        data_hash: data_hash(data),
        training_rows: train.nrows(),
        iterations,
        converged,
        log_likelihood_trace: trace,
    });
    Ok(gmm)
}

fn subsample(data: ArrayView2<f64>, k: usize, opts: &EmOptions, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let wanted = ((opts.subsample_fraction * n as f64).ceil() as usize)
        .max(opts.min_subsample)
        .max(k)
        .min(n);
    if wanted == n {
        return data.to_owned();
    }
    let mut idx = rand::seq::index::sample(rng, n, wanted).into_vec();
    idx.sort_unstable();
    data.select(Axis(0), &idx)
}

/// k-means++ seeding: returns `k` row indices.
fn kmeans_pp(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.nrows();
    let mut centers = vec![rng.random_range(0..n)];
    let sq = |a: ArrayView1<f64>, b: ArrayView1<f64>| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let mut dist: Vec<f64> = data.rows().into_iter().map(|r| sq(r, data.row(centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            if dist[pick] == 0.0 {
                // Rounding pushed us past the last positive entry.
                pick = dist.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        let c = data.row(next);
        for (d, r) in dist.iter_mut().zip(data.rows()) {
            *d = d.min(sq(r, c));
        }
    }
    centers
}

/// Fills `resp` with posteriors and returns the mean log-likelihood. Chunks
/// are reduced in a fixed order, so the result does not depend on thread
/// scheduling.
fn e_step(
    data: ArrayView2<f64>,
    weights: &Array1<f64>,
    means: &Array2<f64>,
    variances: &Array2<f64>,
    resp: &mut Array2<f64>,
) -> f64 {
    let k = weights.len();
    let log_w = weights.mapv(f64::ln);
    let log_norm: Array1<f64> = variances
        .rows()
        .into_iter()
        .map(|v| -0.5 * v.iter().map(|&s| LN_2PI + s.ln()).sum::<f64>())
        .collect();
    let precision = variances.mapv(f64::recip);

    let data_chunks: Vec<_> = data.axis_chunks_iter(Axis(0), CHUNK_ROWS).collect();
    let resp_chunks: Vec<_> = resp.axis_chunks_iter_mut(Axis(0), CHUNK_ROWS).collect();
    let partial: Vec<f64> = data_chunks
        .into_par_iter()
        .zip(resp_chunks)
        .map(|(rows, mut out)| {
            let mut ll = 0.0;
            let mut lj = Array1::zeros(k);
            for (x, mut q) in rows.rows().into_iter().zip(out.rows_mut()) {
                for i in 0..k {
                    let mut quad = 0.0;
                    for ((&xv, &m), &p) in x.iter().zip(means.row(i)).zip(precision.row(i)) {
                        let d = xv - m;
                        quad += d * d * p;
                    }
                    lj[i] = log_w[i] + log_norm[i] - 0.5 * quad;
                }
                let lse = log_sum_exp(lj.view());
                ll += lse;
                for i in 0..k {
                    q[i] = (lj[i] - lse).exp();
                }
            }
            ll
        })
        .collect();
    partial.iter().sum::<f64>() / data.nrows() as f64
}

fn m_step(
    data: ArrayView2<f64>,
    resp: ArrayView2<f64>,
    floor: &Array1<f64>,
    weights: &mut Array1<f64>,
    means: &mut Array2<f64>,
    variances: &mut Array2<f64>,
) {
    let n = data.nrows() as f64;
    let k = weights.len();
    let updates: Vec<Option<(f64, Array1<f64>, Array1<f64>)>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let q = resp.column(i);
            let nk = q.sum();
            if nk < 1e-12 * n {
                return None;
            }
            let mean = q.dot(&data) / nk;
            let mut var = Array1::<f64>::zeros(data.ncols());
            for (x, &qi) in data.rows().into_iter().zip(q) {
                if qi == 0.0 {
                    continue;
                }
                for ((v, &xv), &m) in var.iter_mut().zip(x).zip(&mean) {
                    let d = xv - m;
                    *v += qi * d * d;
                }
            }
            var /= nk;
            ndarray::Zip::from(&mut var).and(floor).for_each(|v, &f| *v = v.max(f));
            Some((nk / n, mean, var))
        })
        .collect();
    for (i, update) in updates.into_iter().enumerate() {
        match update {
            Some((w, mean, var)) => {
                weights[i] = w;
                means.row_mut(i).assign(&mean);
                variances.row_mut(i).assign(&var);
            }
            None => weights[i] = MIN_WEIGHT,
        }
    }
    let total = weights.sum();
    *weights /= total;
}

/// Diagonal Gaussian over one cluster's sensor features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleGaussian {
    pub mean: Array1<f64>,
    pub variances: Array1<f64>,
}

impl SingleGaussian {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: ArrayView1<f64>) -> f64 {
        log_gaussian(x, self.mean.view(), self.variances.view())
    }
}

/// Sample mean and floored, bias-uncorrected variance of the rows of `data`.
/// Returns `None` when there are no rows (an empty cluster).
pub fn fit_single_gaussian(data: ArrayView2<f64>, floor: ArrayView1<f64>) -> Option<SingleGaussian> {
    if data.nrows() == 0 {
        return None;
    }
    let mean = data.mean_axis(Axis(0))?;
    let mut variances = data.var_axis(Axis(0), 0.0);
    ndarray::Zip::from(&mut variances)
        .and(floor)
        .for_each(|v, &f| *v = v.max(f));
    Some(SingleGaussian { mean, variances })
}

/// Per-cluster sensor Gaussians, indexed by video component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorCodebook {
    pub per_cluster: Vec<SingleGaussian>,
    /// Training features assigned to each cluster; zero marks a cluster that
    /// holds the fallback Gaussian fit to all features.
    pub occupancy: Vec<usize>,
}

impl SensorCodebook {
    pub fn components(&self) -> usize {
        self.per_cluster.len()
    }

    pub fn dim(&self) -> usize {
        self.per_cluster.first().map_or(0, SingleGaussian::dim)
    }

    pub fn empty_clusters(&self) -> Vec<usize> {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    fn two_clusters(seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        Array2::from_shape_fn((400, 1), |(r, _)| {
            let c = if r % 2 == 0 { -5.0 } else { 5.0 };
            c + noise.sample(&mut rng)
        })
    }

    #[test]
    fn recovers_separated_clusters() {
        let data = two_clusters(1);
        // Oracle: split at zero and average each side.
        let (neg, pos): (Vec<f64>, Vec<f64>) = data.iter().partition(|&&v| v < 0.0);
        let oracle = [
            neg.iter().sum::<f64>() / neg.len() as f64,
            pos.iter().sum::<f64>() / pos.len() as f64,
        ];
        let gmm = fit_gmm(data.view(), 2, 3, &EmOptions::default()).unwrap();
        let mut order: Vec<usize> = (0..2).collect();
        order.sort_by(|&a, &b| gmm.means[[a, 0]].total_cmp(&gmm.means[[b, 0]]));
        for (slot, &i) in order.iter().enumerate() {
            assert!((gmm.means[[i, 0]] - oracle[slot]).abs() < 0.1);
            assert!((gmm.means[[i, 0]] - [-5.0, 5.0][slot]).abs() < 0.1);
            assert!((gmm.weights[i] - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn single_component_is_closed_form() {
        let data = array![[1.0, 2.0], [3.0, -2.0], [5.0, 0.0], [7.0, 4.0]];
        let gmm = fit_gmm(data.view(), 1, 0, &EmOptions::default()).unwrap();
        assert_eq!(gmm.weights[0], 1.0);
        let mean = data.mean_axis(Axis(0)).unwrap();
        let var = data.var_axis(Axis(0), 0.0);
        for d in 0..2 {
            assert!((gmm.means[[0, d]] - mean[d]).abs() < 1e-12);
            assert!((gmm.variances[[0, d]] - var[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_mixture_collapses_to_points() {
        let data = array![[0.0, 0.0], [10.0, 1.0], [-4.0, 8.0]];
        let opts = EmOptions::default();
        let gmm = fit_gmm(data.view(), 3, 5, &opts).unwrap();
        let floor = opts.variance_floor(data.view());
        for point in data.rows() {
            let hit = (0..3).find(|&i| {
                gmm.means.row(i).iter().zip(point).all(|(a, b)| (a - b).abs() < 1e-9)
            });
            let i = hit.expect("every point owns a component");
            for d in 0..2 {
                assert!((gmm.variances[[i, d]] - floor[d]).abs() <= 1e-12 * floor[d]);
            }
        }
    }

    #[test]
    fn identical_rows_converge_at_floor() {
        let data = Array2::from_elem((20, 3), 2.5);
        let gmm = fit_gmm(data.view(), 2, 0, &EmOptions::default()).unwrap();
        assert!(gmm.variances.iter().all(|&v| v == 1e-10));
        assert!(gmm.means.iter().all(|&m| (m - 2.5).abs() < 1e-12));
    }

    #[test]
    fn too_few_rows() {
        let data = Array2::zeros((2, 1));
        assert!(matches!(
            fit_gmm(data.view(), 3, 0, &EmOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn subsampling_respects_fraction_and_minimum() {
        let data = two_clusters(9);
        let opts = EmOptions {
            subsample_fraction: 0.01,
            min_subsample: 50,
            ..EmOptions::default()
        };
        let gmm = fit_gmm(data.view(), 2, 1, &opts).unwrap();
        assert_eq!(gmm.meta.as_ref().unwrap().training_rows, 50);
        let opts = EmOptions {
            subsample_fraction: 0.25,
            ..EmOptions::default()
        };
        let gmm = fit_gmm(data.view(), 2, 1, &opts).unwrap();
        assert_eq!(gmm.meta.unwrap().training_rows, 100);
    }

    fn symmetric() -> GmmCodebook {
        GmmCodebook::from_parts(
            array![0.5, 0.5],
            array![[-20.0, 0.0], [20.0, 0.0]],
            array![[1.0, 1.0], [1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn responsibility_examples() {
        let one = GmmCodebook::from_parts(array![1.0], array![[3.0]], array![[2.0]]).unwrap();
        assert_eq!(one.responsibilities(array![100.0].view()).unwrap(), array![1.0]);
        assert_eq!(one.hard_assign(array![-4.0].view()).unwrap(), 0);

        let gmm = symmetric();
        let q = gmm.responsibilities(array![-20.0, 0.0].view()).unwrap();
        // Oracle: direct density ratio of the two components.
        let p = |m: f64| (-(-20.0 - m) * (-20.0 - m) / 2.0).exp();
        assert!((q[0] - p(-20.0) / (p(-20.0) + p(20.0))).abs() < 1e-12);
        assert!(q[0] > 0.999);

        let mid = gmm.responsibilities(array![0.0, 3.0].view()).unwrap();
        assert!((mid[0] - 0.5).abs() < 1e-9 && (mid[1] - 0.5).abs() < 1e-9);
        assert_eq!(gmm.hard_assign(array![0.0, 3.0].view()).unwrap(), 0);

        assert!(gmm.responsibilities(array![f64::NAN, 0.0].view()).is_err());
        assert!(gmm.responsibilities(array![0.0].view()).is_err());
    }

    #[test]
    fn argmax_tie_breaks_low() {
        assert_eq!(argmax_first(array![0.2, 0.7, 0.1].view()), 1);
        assert_eq!(argmax_first(array![0.5, 0.5].view()), 0);
        assert_eq!(argmax_first(array![1.0].view()), 0);
    }

    #[test]
    fn posteriors_normalized_for_outliers() {
        let gmm = symmetric();
        for x in [1e6, -1e8, 1e150] {
            let q = gmm.responsibilities(array![x, -x].view()).unwrap();
            assert!((q.sum() - 1.0).abs() < 1e-12);
            assert!(q.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn single_gaussian_examples() {
        let floor = array![1e-6, 1e-6];
        let g = fit_single_gaussian(array![[0.0, 0.0], [2.0, 2.0]].view(), floor.view()).unwrap();
        assert_eq!(g.mean, array![1.0, 1.0]);
        assert_eq!(g.variances, array![1.0, 1.0]);

        let g = fit_single_gaussian(array![[3.0, -1.0]].view(), floor.view()).unwrap();
        assert_eq!(g.mean, array![3.0, -1.0]);
        assert_eq!(g.variances, floor);

        assert!(fit_single_gaussian(Array2::zeros((0, 2)).view(), floor.view()).is_none());
    }

    #[test]
    fn single_gaussian_statistical_oracle() {
        let m = 1000;
        let (mu, sigma) = (1.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dist = Normal::new(mu, sigma).unwrap();
        let data = Array2::from_shape_fn((m, 3), |_| dist.sample(&mut rng));
        let g = fit_single_gaussian(data.view(), array![1e-9, 1e-9, 1e-9].view()).unwrap();
        let bound = 4.0 * sigma / (m as f64).sqrt();
        assert!(g.mean.iter().all(|&v| (v - mu).abs() < bound));
    }

    #[test]
    fn softmax_round_trip() {
        let gmm = GmmCodebook::from_parts(
            array![0.1, 0.6, 0.3],
            Array2::zeros((3, 2)),
            Array2::ones((3, 2)),
        )
        .unwrap();
        let back = softmax(gmm.alphas.view());
        for (a, b) in back.iter().zip(&gmm.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn codebook_json_round_trip() {
        let gmm = fit_gmm(two_clusters(2).view(), 2, 4, &EmOptions::default()).unwrap();
        let text = serde_json::to_string(&gmm).unwrap();
        let back: GmmCodebook = serde_json::from_str(&text).unwrap();
        assert_eq!(back, gmm);
        assert_eq!(back.content_hash(), gmm.content_hash());
    }
}
