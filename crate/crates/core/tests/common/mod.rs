//! Slow, independent reference implementations shared by the integration
//! tests. Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use egomfv::gmm::{GmmCodebook, SensorCodebook, SingleGaussian};
use egomfv::mfv::PairedFeature;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
/// Denominator floor so entries that are exactly zero (the α block of a
/// single component) compare absolutely.
pub const FD_FLOOR: f64 = 1e-8;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

fn log_normal_diag(x: ArrayView1<f64>, mean: ArrayView1<f64>, var: ArrayView1<f64>) -> f64 {
    let mut s = 0.0;
    for d in 0..x.len() {
        let diff = x[d] - mean[d];
        s += -0.5 * ((2.0 * std::f64::consts::PI * var[d]).ln() + diff * diff / var[d]);
    }
    s
}

fn lse(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax(a: &[f64]) -> Vec<f64> {
    let l = lse(a);
    a.iter().map(|x| (x - l).exp()).collect()
}

/// Plain mixture parameters: unconstrained weights, means, precisions.
#[derive(Clone, Debug)]
pub struct Params {
    pub alphas: Vec<f64>,
    pub means: Array2<f64>,
    pub precisions: Array2<f64>,
}

impl Params {
    pub fn random(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Self {
        Params {
            alphas: (0..k).map(|_| rng.random_range(-1.0..1.0)).collect(),
            means: Array2::from_shape_fn((k, dim), |_| rng.random_range(-1.5..1.5)),
            precisions: Array2::from_shape_fn((k, dim), |_| rng.random_range(0.5..2.0)),
        }
    }

    pub fn codebook(&self) -> GmmCodebook {
        GmmCodebook::from_alphas(
            Array1::from(self.alphas.clone()),
            self.means.clone(),
            self.precisions.mapv(|p| 1.0 / p),
        )
        .unwrap()
    }

    pub fn sensor_codebook(&self) -> SensorCodebook {
        SensorCodebook {
            per_cluster: (0..self.means.nrows())
                .map(|i| SingleGaussian {
                    mean: self.means.row(i).to_owned(),
                    variances: self.precisions.row(i).mapv(|p| 1.0 / p),
                })
                .collect(),
            occupancy: vec![1; self.means.nrows()],
        }
    }

    /// `log p(x | ω = i)` for every component.
    fn component_logs(&self, x: ArrayView1<f64>) -> Vec<f64> {
        (0..self.means.nrows())
            .map(|i| {
                let var = self.precisions.row(i).mapv(|p| 1.0 / p);
                log_normal_diag(x, self.means.row(i), var.view())
            })
            .collect()
    }
}

/// `(1/N) Σ_n log Σ_i θ_i p(x_n | i)`.
pub fn mean_loglik(p: &Params, x: ArrayView2<f64>) -> f64 {
    let theta = softmax(&p.alphas);
    let total: f64 = x
        .rows()
        .into_iter()
        .map(|row| {
            let c = p.component_logs(row);
            let v: Vec<f64> = c.iter().zip(&theta).map(|(l, t)| l + t.ln()).collect();
            lse(&v)
        })
        .sum();
    total / x.nrows() as f64
}

/// `(1/N) Σ_n log Σ_i θ_i p(x_n | i) p(s_n | i)`, the video alphas giving θ.
pub fn mean_joint_loglik(video: &Params, sensor: &Params, pairs: &[(Array1<f64>, Array1<f64>)]) -> f64 {
    let theta = softmax(&video.alphas);
    let total: f64 = pairs
        .iter()
        .map(|(x, s)| {
            let cx = video.component_logs(x.view());
            let cs = sensor.component_logs(s.view());
            let v: Vec<f64> = (0..theta.len()).map(|i| theta[i].ln() + cx[i] + cs[i]).collect();
            lse(&v)
        })
        .sum();
    total / pairs.len() as f64
}

/// Central differences of `f` with respect to `[α | μ | Σ⁻¹]` of `p`.
pub fn fd_gradient(p: &Params, f: impl Fn(&Params) -> f64) -> Vec<f64> {
    let h = FD_STEP;
    let central = |bump: &dyn Fn(&mut Params, f64)| {
        let mut plus = p.clone();
        bump(&mut plus, h);
        let mut minus = p.clone();
        bump(&mut minus, -h);
        (f(&plus) - f(&minus)) / (2.0 * h)
    };
    let (k, dim) = p.means.dim();
    let mut g = Vec::with_capacity(k * (1 + 2 * dim));
    for i in 0..k {
        g.push(central(&|q: &mut Params, e| q.alphas[i] += e));
    }
    for i in 0..k {
        for d in 0..dim {
            g.push(central(&|q: &mut Params, e| q.means[[i, d]] += e));
        }
    }
    for i in 0..k {
        for d in 0..dim {
            g.push(central(&|q: &mut Params, e| q.precisions[[i, d]] += e));
        }
    }
    g
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

pub fn to_paired(pairs: &[(Array1<f64>, Array1<f64>)]) -> Vec<PairedFeature> {
    pairs
        .iter()
        .enumerate()
        .map(|(n, (x, s))| PairedFeature {
            x: x.clone(),
            s: s.clone(),
            start_frame: n,
            window_index: n,
        })
        .collect()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (mrp, mrq) = (m[[r, p]], m[[r, q]]);
                    m[[r, p]] = c * mrp - s * mrq;
                    m[[r, q]] = s * mrp + c * mrq;
                }
                for r in 0..n {
                    let (mpr, mqr) = (m[[p, r]], m[[q, r]]);
                    m[[p, r]] = c * mpr - s * mqr;
                    m[[q, r]] = s * mpr + c * mqr;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Sample covariance (N - 1 denominator).
pub fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    Array2::from_shape_fn((d, d), |(a, b)| {
        (0..n).map(|r| (x[[r, a]] - mean[a]) * (x[[r, b]] - mean[b])).sum::<f64>() / (n - 1) as f64
    })
}

/// Binary soft-margin SVM with bias, solved in the dual by accelerated
/// projected gradient. The projection onto `{0 <= a <= C, yᵀa = 0}` is found
/// by bisection on the multiplier of the equality constraint. Returns the
/// primal objective at the recovered `w` and the best bias for it.
pub fn brute_force_svm(x: ArrayView2<f64>, y: &[f64], cost: f64, iters: usize) -> f64 {
    let n = x.nrows();
    let q = Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * x.row(i).dot(&x.row(j)));
    let lipschitz = (0..n).map(|i| q.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(1e-12, f64::max);
    let project = |v: &Array1<f64>| -> Array1<f64> {
        let at = |lam: f64| v.iter().zip(y).map(|(&vi, &yi)| (vi - lam * yi).clamp(0.0, cost)).collect::<Vec<_>>();
        let g = |lam: f64| at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Array1::from(at(0.5 * (lo + hi)))
    };
    let mut a = Array1::<f64>::zeros(n);
    let mut z = a.clone();
    let mut t = 1.0_f64;
    for _ in 0..iters {
        let grad = q.dot(&z) - 1.0;
        let next = project(&(&z - &(grad / lipschitz)));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + &((&next - &a) * ((t - 1.0) / t_next));
        a = next;
        t = t_next;
    }
    let mut w = Array1::<f64>::zeros(x.ncols());
    for i in 0..n {
        w.scaled_add(a[i] * y[i], &x.row(i));
    }
    best_bias_objective(x, y, w.view(), cost)
}

/// `min_b (1/2)|w|² + C Σ max(0, 1 - y(w·x + b))`, exact: the hinge sum is
/// piecewise linear in `b` so the minimum sits on a breakpoint.
pub fn best_bias_objective(x: ArrayView2<f64>, y: &[f64], w: ArrayView1<f64>, cost: f64) -> f64 {
    let margins: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&w)).collect();
    let objective = |b: f64| {
        0.5 * w.dot(&w)
            + cost * margins.iter().zip(y).map(|(m, yi)| (1.0 - yi * (m + b)).max(0.0)).sum::<f64>()
    };
    margins
        .iter()
        .zip(y)
        .map(|(m, yi)| yi - m)
        .map(objective)
        .fold(f64::INFINITY, f64::min)
}

pub fn primal(x: ArrayView2<f64>, y: &[f64], w: ArrayView1<f64>, b: f64, cost: f64) -> f64 {
    0.5 * w.dot(&w)
        + cost
            * x.rows()
                .into_iter()
                .zip(y)
                .map(|(r, yi)| (1.0 - yi * (r.dot(&w) + b)).max(0.0))
                .sum::<f64>()
}
