//! Epsilon-insensitive support vector regression.
//!
//! The dual is solved by sequential minimal optimisation over the `2l`
//! multipliers `(alpha, alpha*)`. Each step picks the maximally violating
//! pair and solves the two-variable subproblem in closed form.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_dist, Matrix};

/// Above this many training rows the kernel matrix is computed row by row
/// instead of being stored.
const DENSE_KERNEL_LIMIT: usize = 2048;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrConfig {
    /// Half-width of the insensitive tube.
    pub epsilon: f64,
    /// Box constraint on every multiplier.
    pub c: f64,
    /// Width of the exponential RBF kernel.
    pub kernel_width: f64,
    /// Largest KKT violation accepted at convergence.
    pub qp_tolerance: f64,
    /// Pair updates are capped at `max_passes * 2l`.
    pub max_passes: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            c: 10.0,
            kernel_width: 10.0,
            qp_tolerance: 1e-6,
            max_passes: 1000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("c", self.c),
            ("kernel_width", self.kernel_width),
            ("qp_tolerance", self.qp_tolerance),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("{v} must be positive")));
            }
        }
        if self.max_passes == 0 {
            return Err(Error::validation("max_passes", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams {
    pub support_inputs: Matrix,
    /// alpha_i - alpha*_i for each support point.
    pub beta: Vec<f64>,
    pub bias: f64,
    pub config: SvrConfig,
}

impl SvrParams {
    pub fn support_count(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(
            "support vectors",
            self.support_inputs.rows(),
            self.beta.len(),
        )?;
        self.config.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrStatus {
    pub converged: bool,
    pub iterations: usize,
    /// Final gap between the most violating pair.
    pub max_kkt_violation: f64,
    /// Bias came from the KKT interval midpoint rather than a free pair.
    pub bias_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SvrTraining {
    pub params: SvrParams,
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub status: SvrStatus,
    /// Dual objective after every pair update, starting from zero.
    pub objective_trace: Vec<f64>,
}

/// K(x, z) = exp(-||x - z|| / (2 sigma^2)), unsquared norm.
pub fn erbf_kernel(x: &[f64], z: &[f64], sigma: f64) -> Result<f64> {
    check_dim("kernel arguments", x.len(), z.len())?;
    if !(sigma > 0.0) {
        return Err(Error::validation("kernel_width", "must be positive"));
    }
    Ok(kernel(x, z, sigma))
}

fn kernel(x: &[f64], z: &[f64], sigma: f64) -> f64 {
    (-sq_dist(x, z).sqrt() / (2.0 * sigma * sigma)).exp()
}

/// Zero inside the tube, linear outside it.
pub fn epsilon_loss(predicted: f64, target: f64, epsilon: f64) -> f64 {
    let d = (predicted - target).abs();
    if d <= epsilon {
        0.0
    } else {
        d - epsilon
    }
}

/// W = sum beta_i y_i - eps sum (alpha_i + alpha*_i) - 0.5 beta^T K beta
pub fn dual_objective(
    alpha: &[f64],
    alpha_star: &[f64],
    x: &Matrix,
    y: &[f64],
    cfg: &SvrConfig,
) -> Result<f64> {
    let l = y.len();
    check_dim("alpha", l, alpha.len())?;
    check_dim("alpha*", l, alpha_star.len())?;
    check_dim("training rows", l, x.rows())?;
    let beta: Vec<f64> = alpha.iter().zip(alpha_star).map(|(a, s)| a - s).collect();
    let mut quad = 0.0;
    for i in 0..l {
        for j in 0..l {
            quad += beta[i] * beta[j] * kernel(x.row(i), x.row(j), cfg.kernel_width);
        }
    }
    let lin: f64 = beta.iter().zip(y).map(|(b, y)| b * y).sum();
    let tube: f64 = alpha.iter().chain(alpha_star).sum();
    Ok(lin - cfg.epsilon * tube - 0.5 * quad)
}

enum KernelRows<'a> {
    Dense(Vec<f64>, usize),
    OnDemand(&'a Matrix, f64),
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a Matrix, sigma: f64) -> Self {
        let l = x.rows();
        if l <= DENSE_KERNEL_LIMIT {
            let mut k = vec![0.0; l * l];
            for i in 0..l {
                k[i * l + i] = 1.0;
                for j in 0..i {
                    let v = kernel(x.row(i), x.row(j), sigma);
                    k[i * l + j] = v;
                    k[j * l + i] = v;
                }
            }
            KernelRows::Dense(k, l)
        } else {
            KernelRows::OnDemand(x, sigma)
        }
    }

    fn row_into(&self, i: usize, out: &mut [f64]) {
        match self {
            KernelRows::Dense(k, l) => out.copy_from_slice(&k[i * l..(i + 1) * l]),
            KernelRows::OnDemand(x, sigma) => {
                let xi = x.row(i);
                for (o, xj) in out.iter_mut().zip(x.iter_rows()) {
                    *o = kernel(xi, xj, *sigma);
                }
            }
        }
    }
}

/// K beta at every training point.
fn kernel_times(x: &Matrix, beta: &[f64], sigma: f64) -> Vec<f64> {
    x.iter_rows()
        .map(|xi| {
            x.iter_rows()
                .zip(beta)
                .filter(|(_, b)| **b != 0.0)
                .map(|(xj, b)| b * kernel(xi, xj, sigma))
                .sum()
        })
        .collect()
}

/// Midpoint of the bias interval allowed by the KKT conditions.
fn kkt_interval_midpoint(
    alpha: &[f64],
    alpha_star: &[f64],
    y: &[f64],
    kb: &[f64],
    cfg: &SvrConfig,
) -> f64 {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..y.len() {
        let from_alpha = y[i] - cfg.epsilon - kb[i];
        let from_star = y[i] + cfg.epsilon - kb[i];
        if alpha[i] < cfg.c {
            lo = lo.max(from_alpha);
        }
        if alpha[i] > 0.0 {
            hi = hi.min(from_alpha);
        }
        if alpha_star[i] > 0.0 {
            lo = lo.max(from_star);
        }
        if alpha_star[i] < cfg.c {
            hi = hi.min(from_star);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Bias of the regression function.
///
/// With a free `alpha_r` and a free `alpha*_s` (lowest indices), the bias is
/// `0.5 (y_r + y_s) - 0.5 sum_i beta_i (K(x_i, x_r) + K(x_i, x_s))`, the mean
/// of the values those two points pin down. Otherwise the midpoint of the
/// KKT-feasible interval is used and the second return value is `true`.
pub fn svr_bias(
    alpha: &[f64],
    alpha_star: &[f64],
    x: &Matrix,
    y: &[f64],
    cfg: &SvrConfig,
) -> Result<(f64, bool)> {
    let l = y.len();
    check_dim("alpha", l, alpha.len())?;
    check_dim("alpha*", l, alpha_star.len())?;
    check_dim("training rows", l, x.rows())?;
    let beta: Vec<f64> = alpha.iter().zip(alpha_star).map(|(a, s)| a - s).collect();
    let kb = kernel_times(x, &beta, cfg.kernel_width);
    Ok(bias_from(alpha, alpha_star, y, &kb, cfg))
}

fn bias_from(
    alpha: &[f64],
    alpha_star: &[f64],
    y: &[f64],
    kb: &[f64],
    cfg: &SvrConfig,
) -> (f64, bool) {
    let free = |v: f64| v > 0.0 && v < cfg.c;
    let r = alpha.iter().position(|a| free(*a));
    let s = alpha_star.iter().position(|a| free(*a));
    match (r, s) {
        (Some(r), Some(s)) => (0.5 * (y[r] + y[s]) - 0.5 * (kb[r] + kb[s]), false),
        _ => (kkt_interval_midpoint(alpha, alpha_star, y, kb, cfg), true),
    }
}

pub fn svr_train(x: &Matrix, y: &[f64], cfg: &SvrConfig) -> Result<SvrTraining> {
    cfg.validate()?;
    let l = y.len();
    check_dim("training rows", x.rows(), l)?;
    if l < 2 {
        return Err(Error::validation("training rows", "need at least 2 points"));
    }
    if y.iter().chain(x.as_slice()).any(|v| !v.is_finite()) {
        return Err(Error::validation("training data", "non-finite value"));
    }
    let kernels = KernelRows::new(x, cfg.kernel_width);
    let n = 2 * l;
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    // a[t]: alpha for t < l, alpha* for t >= l
    let mut a = vec![0.0; n];
    let mut kb = vec![0.0; l];
    let grad = |a_kb: &[f64], t: usize| sign(t) * (a_kb[t % l] - y[t % l]) + cfg.epsilon;
    let mut row_i = vec![0.0; l];
    let mut row_j = vec![0.0; l];
    let max_iter = cfg.max_passes.saturating_mul(n);
    let mut objective = 0.0;
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut gap;

    loop {
        // -s_t G_t is the bias value implied by multiplier t
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -sign(t) * grad(&kb, t);
            let up = if t < l { a[t] < cfg.c } else { a[t] > 0.0 };
            let low = if t < l { a[t] > 0.0 } else { a[t] < cfg.c };
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < cfg.qp_tolerance {
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (pi, pj) = (i % l, j % l);
        let (si, sj) = (sign(i), sign(j));
        kernels.row_into(pi, &mut row_i);
        kernels.row_into(pj, &mut row_j);
        let kij = row_i[pj];
        let (gi, gj) = (grad(&kb, i), grad(&kb, j));
        let (old_i, old_j) = (a[i], a[j]);
        let c = cfg.c;
        if si != sj {
            let mut quad = 2.0 - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-gi - gj) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = 2.0 - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (gi - gj) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let dbi = si * (a[i] - old_i);
        let dbj = sj * (a[j] - old_j);
        // objective change of the pair step, evaluated before kb moves
        let lin = dbi * y[pi] + dbj * y[pj] - cfg.epsilon * (a[i] - old_i + a[j] - old_j);
        let quad_change =
            dbi * kb[pi] + dbj * kb[pj] + 0.5 * (dbi * dbi + dbj * dbj + 2.0 * dbi * dbj * kij);
        objective += lin - quad_change;
        trace.push(objective);
        for ((k, ri), rj) in kb.iter_mut().zip(&row_i).zip(&row_j) {
            *k += ri * dbi + rj * dbj;
        }
    }

    let (alpha, alpha_star) = a.split_at(l);
    let (bias, fallback) = bias_from(alpha, alpha_star, y, &kb, cfg);
    let mut support = Vec::new();
    let mut beta = Vec::new();
    for p in 0..l {
        let b = alpha[p] - alpha_star[p];
        if b.abs() > cfg.qp_tolerance {
            support.push(x.row(p));
            beta.push(b);
        }
    }
    let support_inputs = if support.is_empty() {
        Matrix::zeros(0, x.cols())
    } else {
        Matrix::from_rows(&support)?
    };
    Ok(SvrTraining {
        params: SvrParams {
            support_inputs,
            beta,
            bias,
            config: *cfg,
        },
        alpha: alpha.to_vec(),
        alpha_star: alpha_star.to_vec(),
        status: SvrStatus {
            converged: gap < cfg.qp_tolerance,
            iterations,
            max_kkt_violation: gap.max(0.0),
            bias_fallback: fallback,
        },
        objective_trace: trace,
    })
}

/// f(x) = sum_i beta_i K(s_i, x) + b
pub fn svr_predict(p: &SvrParams, x: &[f64]) -> Result<f64> {
    check_dim("svr input", p.support_inputs.cols(), x.len())?;
    let sigma = p.config.kernel_width;
    Ok(p.bias
        + p.support_inputs
            .iter_rows()
            .zip(&p.beta)
            .map(|(s, b)| b * kernel(s, x, sigma))
            .sum::<f64>())
}
