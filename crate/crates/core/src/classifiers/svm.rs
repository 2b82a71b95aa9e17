//! C-SVM with an RBF kernel, solved by SMO with second-order working-set
//! selection over a precomputed kernel matrix.

use serde::{Deserialize, Serialize};

use super::Design;
use crate::error::{Error, Result};
use crate::nn::tensor::matmul_bt_acc;

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Rbf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / (d · Var(X))` over all training values.
    Scale,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub gamma: Gamma,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Iteration cap; `None` uses `max(10^7, 100 n)`.
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { kernel: Kernel::Rbf, c: 1.0, gamma: Gamma::Scale, tol: 1e-3, max_iter: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub params: SvmParams,
    pub d: usize,
    /// Resolved kernel width.
    pub gamma: f64,
    pub support: Vec<f64>,
    /// `α_i y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_norms(x: &[f64], d: usize) -> Vec<f64> {
    x.chunks_exact(d).map(|r| r.iter().map(|v| v * v).sum()).collect()
}

/// `exp(-γ ‖a_i - b_j‖²)` for all rows of `a` and `b`.
fn rbf_matrix(a: &[f64], b: &[f64], d: usize, gamma: f64) -> Vec<f64> {
    let (na, nb) = (a.len() / d, b.len() / d);
    let (sa, sb) = (sq_norms(a, d), sq_norms(b, d));
    let mut k = vec![0.0; na * nb];
    matmul_bt_acc(a, b, &mut k, na, d, nb);
    for i in 0..na {
        for j in 0..nb {
            let dist = (sa[i] + sb[j] - 2.0 * k[i * nb + j]).max(0.0);
            k[i * nb + j] = (-gamma * dist).exp();
        }
    }
    k
}

struct Solution {
    alpha: Vec<f64>,
    grad: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn solve(k: &[f64], y: &[f64], c: f64, eps: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    // Gradient of ½αᵀQα − eᵀα.
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut it = 0;
    let mut converged = false;
    while it < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = -y[t] * grad[t];
            gmax2 = gmax2.max(-v);
            let diff = gmax - v;
            if diff > 0.0 {
                let a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                let obj = -(diff * diff) / if a > 0.0 { a } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        if gmax + gmax2 < eps {
            converged = true;
            break;
        }
        it += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (k[i * n + i] + k[j * n + j] + 2.0 * q(i, j)).max(TAU);
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
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[i * n + i] + k[j * n + j] - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }
    Solution { alpha, grad, iterations: it, converged }
}

/// Offset `b` of the decision function, averaged over free vectors.
fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
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
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    -rho
}

impl Svm {
    pub(crate) fn fit(params: SvmParams, data: &Design) -> Result<Self> {
        if !(params.c > 0.0) || !(params.tol > 0.0) {
            return Err(Error::invalid("svm needs positive C and tolerance"));
        }
        let gamma = match params.gamma {
            Gamma::Value(g) if g > 0.0 => g,
            Gamma::Value(g) => return Err(Error::invalid(format!("svm gamma must be positive, got {g}"))),
            Gamma::Scale => {
                let mean = data.x.iter().sum::<f64>() / data.x.len() as f64;
                let var = data.x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / data.x.len() as f64;
                if var > 0.0 {
                    1.0 / (data.d as f64 * var)
                } else {
                    1.0
                }
            }
        };
        let n = data.n;
        let k = rbf_matrix(&data.x, &data.x, data.d, gamma);
        let y: Vec<f64> = data.y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
        let max_iter = params.max_iter.unwrap_or((100 * n).max(10_000_000));
        let sol = solve(&k, &y, params.c, params.tol, max_iter);
        if !sol.converged {
            log::warn!("svm stopped after {} iterations without meeting tol {}", sol.iterations, params.tol);
        }
        let b = bias(&sol.alpha, &sol.grad, &y, params.c);
        let mut support = Vec::new();
        let mut dual_coef = Vec::new();
        for i in 0..n {
            if sol.alpha[i] > 0.0 {
                support.extend_from_slice(data.row(i));
                dual_coef.push(sol.alpha[i] * y[i]);
            }
        }
        Ok(Svm {
            params,
            d: data.d,
            gamma,
            support,
            dual_coef,
            bias: b,
            iterations: sol.iterations,
            converged: sol.converged,
        })
    }

    pub fn n_support(&self) -> usize {
        self.dual_coef.len()
    }

    /// Decision values `Σ α_i y_i K(x_i, x) + b`; positive means apneic.
    pub fn decision_rows(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() / self.d;
        if self.dual_coef.is_empty() {
            return vec![self.bias; n];
        }
        let k = rbf_matrix(x, &self.support, self.d, self.gamma);
        let s = self.dual_coef.len();
        (0..n)
            .map(|i| k[i * s..(i + 1) * s].iter().zip(&self.dual_coef).map(|(a, b)| a * b).sum::<f64>() + self.bias)
            .collect()
    }

    /// Fraction of training points meeting the KKT conditions within `tol`
    /// (`α = 0 ⇒ y f ≥ 1`, `0 < α < C ⇒ y f = 1`, `α = C ⇒ y f ≤ 1`).
    pub fn kkt_fraction(&self, x: &[f64], y: &[bool], tol: f64) -> f64 {
        let f = self.decision_rows(x);
        let mut alpha = vec![0.0; y.len()];
        for (s, coef) in self.support.chunks_exact(self.d).zip(&self.dual_coef) {
            for (i, row) in x.chunks_exact(self.d).enumerate() {
                if row == s {
                    alpha[i] = coef.abs();
                }
            }
        }
        let c = self.params.c;
        let ok = (0..y.len())
            .filter(|&i| {
                let yf = if y[i] { f[i] } else { -f[i] };
                if alpha[i] <= 0.0 {
                    yf >= 1.0 - tol
                } else if alpha[i] >= c {
                    yf <= 1.0 + tol
                } else {
                    (yf - 1.0).abs() <= tol
                }
            })
            .count();
        ok as f64 / y.len() as f64
    }
}
