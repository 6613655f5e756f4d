//! One-vs-rest linear SVMs with an unregularized bias.
//!
//! Each binary problem minimizes `½‖w‖² + C Σ max(0, 1 − y(w·x + b))`. The
//! dual is solved with SMO over a precomputed linear Gram matrix, using
//! second-order working-set selection, and the tolerance is tightened until
//! the relative duality gap is at most [`DUALITY_GAP_TOL`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::gmm::argmax_first;

pub const DEFAULT_COST: f64 = 10.0;
/// Gap between primal and dual objectives, relative to `max(1, primal)`.
pub const DUALITY_GAP_TOL: f64 = 1e-4;

const TAU: f64 = 1e-12;
const MAX_ITERS_PER_POINT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOvrModel {
    /// Sorted ascending; row `c` of `weights` belongs to `classes[c]`.
    pub classes: Vec<Label>,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub cost: f64,
    pub seed: u64,
}

/// Solution of one binary problem.
#[derive(Debug, Clone)]
pub struct BinarySvm {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

/// `½‖w‖² + C Σ max(0, 1 − y(w·x + b))`.
pub fn primal_objective(
    x: ArrayView2<f64>,
    y: &[f64],
    w: ArrayView1<f64>,
    b: f64,
    cost: f64,
) -> f64 {
    let hinge: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - yi * (xi.dot(&w) + b)).max(0.0))
        .sum();
    0.5 * w.dot(&w) + cost * hinge
}

/// Solves one binary problem with labels `y ∈ {−1, +1}` given the Gram
/// matrix of `x`.
pub fn train_binary(x: ArrayView2<f64>, gram: ArrayView2<f64>, y: &[f64], cost: f64) -> Result<BinarySvm> {
    let n = y.len();
    if n == 0 || gram.dim() != (n, n) || x.nrows() != n {
        return Err(Error::validation("inconsistent SVM problem shapes"));
    }
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::validation(format!("cost must be positive, got {cost}")));
    }

    let mut alpha = vec![0.0; n];
    // Gradient of ½ αᵀQα − Σα with Q_ij = y_i y_j K_ij.
    let mut grad = vec![-1.0; n];
    let mut eps = 1e-3;
    let max_iters = MAX_ITERS_PER_POINT * n.max(10);
    let mut iterations = 0;

    loop {
        while iterations < max_iters {
            let Some((i, j)) = select_pair(&alpha, &grad, y, gram, cost, eps) else {
                break;
            };
            iterations += 1;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            update_pair(&mut alpha, &grad, y, gram, cost, i, j);
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            if di == 0.0 && dj == 0.0 {
                continue;
            }
            for t in 0..n {
                grad[t] += y[t] * (y[i] * gram[[t, i]] * di + y[j] * gram[[t, j]] * dj);
            }
        }

        let (weights, bias) = recover_primal(x, &alpha, &grad, y, cost);
        let (bias, primal) = refine_bias(x, y, weights.view(), bias, cost);
        let dual = alpha.iter().sum::<f64>() - 0.5 * weights.dot(&weights);
        let gap = primal - dual;
        if gap <= DUALITY_GAP_TOL * primal.abs().max(1.0) || eps < 1e-12 || iterations >= max_iters {
            if gap > DUALITY_GAP_TOL * primal.abs().max(1.0) {
                log::warn!("SVM stopped with duality gap {gap:.3e} after {iterations} iterations");
            }
            return Ok(BinarySvm {
                weights,
                bias,
                primal_objective: primal,
                dual_objective: dual,
                iterations,
            });
        }
        eps *= 0.1;
    }
}

fn in_up(a: f64, y: f64, cost: f64) -> bool {
    (y > 0.0 && a < cost) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, cost: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < cost)
}

/// Second-order working-set selection; `None` once the maximal KKT
/// violation is below `eps`.
fn select_pair(
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    gram: ArrayView2<f64>,
    cost: f64,
    eps: f64,
) -> Option<(usize, usize)> {
    let n = alpha.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut i = usize::MAX;
    for t in 0..n {
        if in_up(alpha[t], y[t], cost) && -y[t] * grad[t] >= gmax {
            gmax = -y[t] * grad[t];
            i = t;
        }
    }
    if i == usize::MAX {
        return None;
    }
    let mut gmax2 = f64::NEG_INFINITY;
    let mut best = f64::INFINITY;
    let mut j = usize::MAX;
    for t in 0..n {
        if !in_low(alpha[t], y[t], cost) {
            continue;
        }
        let yg = y[t] * grad[t];
        gmax2 = gmax2.max(yg);
        let diff = gmax + yg;
        if diff > 0.0 {
            let quad = gram[[i, i]] + gram[[t, t]] - 2.0 * gram[[i, t]];
            let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
            if obj <= best {
                best = obj;
                j = t;
            }
        }
    }
    if gmax + gmax2 < eps || j == usize::MAX {
        None
    } else {
        Some((i, j))
    }
}

fn update_pair(
    alpha: &mut [f64],
    grad: &[f64],
    y: &[f64],
    gram: ArrayView2<f64>,
    cost: f64,
    i: usize,
    j: usize,
) {
    let quad = {
        let q = gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]];
        if q > 0.0 {
            q
        } else {
            TAU
        }
    };
    if y[i] != y[j] {
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if diff > 0.0 {
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = -diff;
        }
        if diff > 0.0 {
            if alpha[i] > cost {
                alpha[i] = cost;
                alpha[j] = cost - diff;
            }
        } else if alpha[j] > cost {
            alpha[j] = cost;
            alpha[i] = cost + diff;
        }
    } else {
        let delta = (grad[i] - grad[j]) / quad;
        let sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if sum > cost {
            if alpha[i] > cost {
                alpha[i] = cost;
                alpha[j] = sum - cost;
            }
        } else if alpha[j] < 0.0 {
            alpha[j] = 0.0;
            alpha[i] = sum;
        }
        if sum > cost {
            if alpha[j] > cost {
                alpha[j] = cost;
                alpha[i] = sum - cost;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = sum;
        }
    }
}

/// Weights `Σ α_i y_i x_i` and the bias from the KKT conditions: the mean of
/// `−y_i G_i` over free variables, or the midpoint of the feasible interval
/// when no variable is free.
fn recover_primal(x: ArrayView2<f64>, alpha: &[f64], grad: &[f64], y: &[f64], cost: f64) -> (Array1<f64>, f64) {
    let mut w = Array1::zeros(x.ncols());
    for ((xi, &a), &yi) in x.rows().into_iter().zip(alpha).zip(y) {
        if a != 0.0 {
            w.scaled_add(a * yi, &xi);
        }
    }
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= cost {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    (w, -rho)
}

/// Keeps the KKT bias unless one of the hinge breakpoints `b = y_i − w·x_i`
/// gives a lower primal objective for the fixed `w`. Only matters when no
/// dual variable is strictly inside its box.
fn refine_bias(x: ArrayView2<f64>, y: &[f64], w: ArrayView1<f64>, bias: f64, cost: f64) -> (f64, f64) {
    let margins: Vec<f64> = x.rows().into_iter().map(|xi| xi.dot(&w)).collect();
    let half_norm = 0.5 * w.dot(&w);
    let objective = |b: f64| {
        half_norm
            + cost
                * margins
                    .iter()
                    .zip(y)
                    .map(|(m, yi)| (1.0 - yi * (m + b)).max(0.0))
                    .sum::<f64>()
    };
    let mut best = (bias, objective(bias));
    for (m, yi) in margins.iter().zip(y) {
        let b = yi - m;
        let v = objective(b);
        if v < best.1 {
            best = (b, v);
        }
    }
    best
}

/// Trains one binary SVM per class (that class against the rest).
///
/// `seed` is recorded with the model; SMO itself is deterministic.
pub fn train_ovr(features: ArrayView2<f64>, labels: &[Label], cost: f64, seed: u64) -> Result<LinearOvrModel> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::validation("one label per feature row required"));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("training features contain non-finite values"));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::validation("training needs at least two classes"));
    }
    let gram = features.dot(&features.t());
    let solved: Vec<BinarySvm> = classes
        .par_iter()
        .map(|&c| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            train_binary(features, gram.view(), &y, cost)
        })
        .collect::<Result<_>>()?;

    let mut weights = Array2::zeros((classes.len(), features.ncols()));
    let mut bias = Array1::zeros(classes.len());
    for (c, svm) in solved.into_iter().enumerate() {
        weights.row_mut(c).assign(&svm.weights);
        bias[c] = svm.bias;
    }
    Ok(LinearOvrModel {
        classes,
        weights,
        bias,
        cost,
        seed,
    })
}

impl LinearOvrModel {
    pub fn scores(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.weights.ncols() {
            return Err(Error::validation(format!(
                "feature has {} dims, model expects {}",
                x.len(),
                self.weights.ncols()
            )));
        }
        Ok(self.weights.dot(&x) + &self.bias)
    }

    /// Highest-scoring class; ties go to the smallest class id.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<(Label, Array1<f64>)> {
        let scores = self.scores(x)?;
        Ok((self.classes[argmax_first(scores.view())], scores))
    }
}
