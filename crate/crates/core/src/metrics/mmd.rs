//! Unbiased MMD² with a Gaussian kernel on whole-window vectors, plus
//! bandwidth selection by maximizing the t-statistic `MMD² / sqrt(V)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Window;

pub const VARIANCE_FLOOR: f64 = 1e-8;
pub const KERNEL_STEPS: usize = 100;
pub const KERNEL_STEP_SIZE: f64 = 0.05;
/// Largest change of `log σ` per ascent step.
pub const KERNEL_MAX_LOG_STEP: f64 = 1.0;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn vectors(w: &[Window]) -> Vec<&[f64]> {
    w.iter().map(|w| w.values.as_slice()).collect()
}

fn check_lengths(x: &[&[f64]], y: &[&[f64]]) -> Result<()> {
    let d = x.first().or(y.first()).map(|v| v.len()).unwrap_or(0);
    if x.iter().chain(y).any(|v| v.len() != d) {
        return Err(Error::shape("MMD inputs differ in window length"));
    }
    Ok(())
}

/// Squared distances within `x`, within `y`, and across, computed once.
struct Distances {
    xx: Vec<f64>,
    yy: Vec<f64>,
    xy: Vec<f64>,
    n: usize,
    m: usize,
    /// Whether `x` precedes `y` in the canonical order; the cross term is
    /// summed in that orientation so that swapping arguments is exact.
    x_first: bool,
}

fn precedes(x: &[&[f64]], y: &[&[f64]]) -> bool {
    let key = |s: &[&[f64]]| (s.len(), s.first().map_or(0, |v| v.len()));
    if key(x) != key(y) {
        return key(x) < key(y);
    }
    let flat = |s: &[&[f64]]| s.iter().flat_map(|v| v.iter().copied()).collect::<Vec<f64>>();
    flat(x).iter().zip(flat(y).iter()).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()) != Some(std::cmp::Ordering::Greater)
}

impl Distances {
    fn new(x: &[&[f64]], y: &[&[f64]]) -> Self {
        let pairs = |a: &[&[f64]], b: &[&[f64]]| -> Vec<f64> {
            a.iter().flat_map(|u| b.iter().map(move |v| sq_dist(u, v))).collect()
        };
        Distances { xx: pairs(x, x), yy: pairs(y, y), xy: pairs(x, y), n: x.len(), m: y.len(), x_first: precedes(x, y) }
    }

    fn mmd2(&self, sigma: f64) -> f64 {
        let g = -1.0 / (2.0 * sigma * sigma);
        let off_diag = |d: &[f64], n: usize| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += (g * d[i * n + j]).exp();
                    }
                }
            }
            s / (n * (n - 1)) as f64
        };
        let mut cross = 0.0;
        if self.x_first {
            for &d in &self.xy {
                cross += (g * d).exp();
            }
        } else {
            for j in 0..self.m {
                for i in 0..self.n {
                    cross += (g * self.xy[i * self.m + j]).exp();
                }
            }
        }
        cross /= (self.n * self.m) as f64;
        let (within_x, within_y) = (off_diag(&self.xx, self.n), off_diag(&self.yy, self.m));
        let within = if self.x_first { within_x + within_y } else { within_y + within_x };
        within - 2.0 * cross
    }

    /// t-statistic and its derivative in `log σ`, on the first
    /// `min(n, m)` points of each sample.
    fn t_stat(&self, sigma: f64) -> (f64, f64) {
        let q = self.n.min(self.m);
        let g = -1.0 / (2.0 * sigma * sigma);
        let s2 = sigma * sigma;
        // k and dk/dlogσ = k·d/σ².
        let k = |d: f64| -> (f64, f64) {
            let v = (g * d).exp();
            (v, v * d / s2)
        };
        let mut hbar = vec![0.0; q];
        let mut dhbar = vec![0.0; q];
        for i in 0..q {
            for j in 0..q {
                if i == j {
                    continue;
                }
                let (kxx, dxx) = k(self.xx[i * self.n + j]);
                let (kyy, dyy) = k(self.yy[i * self.m + j]);
                let (kxy, dxy) = k(self.xy[i * self.m + j]);
                let (kyx, dyx) = k(self.xy[j * self.m + i]);
                hbar[i] += kxx + kyy - kxy - kyx;
                dhbar[i] += dxx + dyy - dxy - dyx;
            }
        }
        let qf = q as f64;
        for i in 0..q {
            hbar[i] /= qf - 1.0;
            dhbar[i] /= qf - 1.0;
        }
        let mmd = hbar.iter().sum::<f64>() / qf;
        let dmmd = dhbar.iter().sum::<f64>() / qf;
        let second = hbar.iter().map(|h| h * h).sum::<f64>() / qf;
        let dsecond = hbar.iter().zip(&dhbar).map(|(h, dh)| 2.0 * h * dh).sum::<f64>() / qf;
        let raw_v = 4.0 / qf * (second - mmd * mmd);
        let (v, dv) = if raw_v > VARIANCE_FLOOR {
            (raw_v, 4.0 / qf * (dsecond - 2.0 * mmd * dmmd))
        } else {
            (VARIANCE_FLOOR, 0.0)
        };
        let t = mmd / v.sqrt();
        let dt = dmmd / v.sqrt() - 0.5 * mmd * dv / (v * v.sqrt());
        (t, dt)
    }
}

/// Unbiased squared MMD between two sets of windows.
pub fn mmd2_unbiased(x: &[Window], y: &[Window], sigma: f64) -> Result<f64> {
    mmd2_unbiased_vectors(&vectors(x), &vectors(y), sigma)
}

pub fn mmd2_unbiased_vectors(x: &[&[f64]], y: &[&[f64]], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("kernel sigma must be positive, got {sigma}")));
    }
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid("MMD needs at least two points per sample"));
    }
    check_lengths(x, y)?;
    Ok(Distances::new(x, y).mmd2(sigma))
}

/// Median pairwise Euclidean distance over the pooled sample.
pub fn median_heuristic(x: &[Window], y: &[Window]) -> Result<f64> {
    median_heuristic_vectors(&vectors(x).into_iter().chain(vectors(y)).collect::<Vec<_>>())
}

pub fn median_heuristic_vectors(pool: &[&[f64]]) -> Result<f64> {
    if pool.len() < 2 {
        return Err(Error::invalid("median heuristic needs at least two points"));
    }
    let mut d: Vec<f64> = Vec::with_capacity(pool.len() * (pool.len() - 1) / 2);
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            d.push(sq_dist(pool[i], pool[j]).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    // Degenerate pools fall back to unit bandwidth.
    Ok(if med > 0.0 && med.is_finite() { med } else { 1.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    pub sigma: f64,
    pub t_stat: f64,
    pub initial_t_stat: f64,
    /// Set when the objective went non-finite and σ fell back to the median heuristic.
    pub fell_back: bool,
}

/// Gradient ascent on `log σ` of the training t-statistic, keeping the best
/// iterate.
pub fn optimize_kernel(x_train: &[Window], y_train: &[Window], init_sigma: f64) -> Result<KernelFit> {
    optimize_kernel_vectors(&vectors(x_train), &vectors(y_train), init_sigma)
}

pub fn optimize_kernel_vectors(x: &[&[f64]], y: &[&[f64]], init_sigma: f64) -> Result<KernelFit> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid("kernel optimization needs at least two points per sample"));
    }
    if !(init_sigma > 0.0) || !init_sigma.is_finite() {
        return Err(Error::invalid(format!("initial sigma must be positive, got {init_sigma}")));
    }
    check_lengths(x, y)?;
    let dist = Distances::new(x, y);
    let (t0, mut grad) = dist.t_stat(init_sigma);
    if !t0.is_finite() || !grad.is_finite() {
        return Ok(fallback(x, y, &dist));
    }
    let mut log_s = init_sigma.ln();
    let (mut best_s, mut best_t) = (init_sigma, t0);
    for _ in 0..KERNEL_STEPS {
        log_s += (KERNEL_STEP_SIZE * grad).clamp(-KERNEL_MAX_LOG_STEP, KERNEL_MAX_LOG_STEP);
        let s = log_s.exp();
        let (t, dt) = dist.t_stat(s);
        if !t.is_finite() || !dt.is_finite() {
            log::warn!("kernel objective went non-finite at sigma {s}; using the median heuristic");
            return Ok(fallback(x, y, &dist));
        }
        if t > best_t {
            best_t = t;
            best_s = s;
        }
        grad = dt;
    }
    Ok(KernelFit { sigma: best_s, t_stat: best_t, initial_t_stat: t0, fell_back: false })
}

fn fallback(x: &[&[f64]], y: &[&[f64]], dist: &Distances) -> KernelFit {
    let pool: Vec<&[f64]> = x.iter().chain(y).copied().collect();
    let sigma = median_heuristic_vectors(&pool).unwrap_or(1.0);
    let t = dist.t_stat(sigma).0;
    KernelFit { sigma, t_stat: t, initial_t_stat: t, fell_back: true }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    /// MMD² on the held-out halves at the optimized bandwidth.
    pub mmd2: f64,
    pub sigma: f64,
    /// t-statistic on the held-out halves.
    pub t_stat: f64,
    pub train_t_stat: f64,
    pub fell_back: bool,
}

fn halves<'a>(w: &'a [Window], rng: &mut ChaCha8Rng) -> (Vec<&'a [f64]>, Vec<&'a [f64]>) {
    let mut v = vectors(w);
    v.shuffle(rng);
    let test = v.split_off(v.len() / 2);
    (v, test)
}

/// Splits each sample into random halves, fits σ on the first halves and
/// reports MMD² and the t-statistic on the second.
pub fn mmd_test(real: &[Window], synth: &[Window], seed: u64) -> Result<MmdReport> {
    if real.len() < 4 || synth.len() < 4 {
        return Err(Error::invalid("MMD test needs at least four windows per sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x_tr, x_te) = halves(real, &mut rng);
    let (y_tr, y_te) = halves(synth, &mut rng);
    let pool: Vec<&[f64]> = x_tr.iter().chain(&y_tr).copied().collect();
    let init = median_heuristic_vectors(&pool)?;
    let fit = optimize_kernel_vectors(&x_tr, &y_tr, init)?;
    check_lengths(&x_te, &y_te)?;
    let dist = Distances::new(&x_te, &y_te);
    Ok(MmdReport {
        mmd2: dist.mmd2(fit.sigma),
        sigma: fit.sigma,
        t_stat: dist.t_stat(fit.sigma).0,
        train_t_stat: fit.t_stat,
        fell_back: fit.fell_back,
    })
}
