//! Scaled conjugate gradient minimisation (Møller 1993).
//!
//! Second-order step lengths come from a finite-difference estimate of the
//! curvature along the search direction, regularised by an adaptive scale
//! that plays the role of a trust region. No line search is needed.

use crate::error::{Error, Result};
use crate::linalg::dot;

/// A differentiable cost over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgSettings {
    pub max_iterations: usize,
    /// Stop once the gradient norm drops below this.
    pub gradient_tolerance: f64,
    /// Initial curvature regulariser.
    pub initial_scale: f64,
    /// Step used for the directional second-derivative estimate.
    pub sigma0: f64,
}

impl Default for ScgSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            initial_scale: 1e-6,
            sigma0: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScgOutcome {
    pub params: Vec<f64>,
    /// Cost at the start and after every iteration; never increases.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const SCALE_MIN: f64 = 1e-15;
const SCALE_MAX: f64 = 1e100;

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, d: &[f64]) {
    for ((o, xi), di) in out.iter_mut().zip(x).zip(d) {
        *o = xi + a * di;
    }
}

pub fn scg_minimize(obj: &impl Objective, init: &[f64], cfg: &ScgSettings) -> Result<ScgOutcome> {
    let n = obj.dim();
    crate::error::check_dim("scg parameters", n, init.len())?;
    let mut x = init.to_vec();
    let mut f_old = obj.value(&x);
    if !f_old.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut history = vec![f_old];
    let mut g_new = vec![0.0; n];
    obj.gradient(&x, &mut g_new);
    if norm(&g_new) < cfg.gradient_tolerance {
        return Ok(ScgOutcome {
            params: x,
            cost_history: history,
            iterations: 0,
            converged: true,
        });
    }
    let mut g_old = g_new.clone();
    let mut d: Vec<f64> = g_new.iter().map(|g| -g).collect();
    let mut scale = cfg.initial_scale;
    let mut success = true;
    let mut n_success = 0usize;
    let (mut mu, mut kappa, mut gamma) = (0.0, 0.0, 0.0);
    let mut x_trial = vec![0.0; n];
    let mut g_plus = vec![0.0; n];

    for it in 1..=cfg.max_iterations {
        if success {
            mu = dot(&d, &g_new);
            if mu >= 0.0 {
                d.iter_mut().zip(&g_new).for_each(|(di, gi)| *di = -gi);
                mu = dot(&d, &g_new);
            }
            kappa = dot(&d, &d);
            if kappa < f64::EPSILON {
                return Ok(ScgOutcome {
                    params: x,
                    cost_history: history,
                    iterations: it - 1,
                    converged: true,
                });
            }
            let sigma = cfg.sigma0 / kappa.sqrt();
            axpy_into(&mut x_trial, &x, sigma, &d);
            obj.gradient(&x_trial, &mut g_plus);
            gamma = d
                .iter()
                .zip(g_plus.iter().zip(&g_new))
                .map(|(di, (gp, gn))| di * (gp - gn))
                .sum::<f64>()
                / sigma;
        }

        // force the scaled curvature positive
        let mut delta = gamma + scale * kappa;
        if delta <= 0.0 {
            delta = scale * kappa;
            scale -= gamma / kappa;
        }
        let alpha = -mu / delta;
        axpy_into(&mut x_trial, &x, alpha, &d);
        let f_new = obj.value(&x_trial);
        if !f_new.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        let comparison = 2.0 * (f_new - f_old) / (alpha * mu);
        if comparison >= 0.0 {
            success = true;
            n_success += 1;
            std::mem::swap(&mut x, &mut x_trial);
            f_old = f_new;
            g_old.copy_from_slice(&g_new);
            obj.gradient(&x, &mut g_new);
        } else {
            success = false;
        }
        history.push(f_old);

        if success && norm(&g_new) < cfg.gradient_tolerance {
            return Ok(ScgOutcome {
                params: x,
                cost_history: history,
                iterations: it,
                converged: true,
            });
        }

        if comparison < 0.25 {
            scale = (4.0 * scale).min(SCALE_MAX);
        }
        if comparison > 0.75 {
            scale = (0.5 * scale).max(SCALE_MIN);
        }

        if n_success == n {
            d.iter_mut().zip(&g_new).for_each(|(di, gi)| *di = -gi);
            n_success = 0;
        } else if success {
            let beta = g_old
                .iter()
                .zip(&g_new)
                .map(|(o, nw)| (o - nw) * nw)
                .sum::<f64>()
                / mu;
            d.iter_mut()
                .zip(&g_new)
                .for_each(|(di, gi)| *di = beta * *di - gi);
        }
    }
    Ok(ScgOutcome {
        params: x,
        cost_history: history,
        iterations: cfg.max_iterations,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 0.5 (w - c)^T A (w - c) with diagonal-dominant A.
    struct Quadratic {
        a: Vec<Vec<f64>>,
        c: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.c.len()
        }
        fn value(&self, w: &[f64]) -> f64 {
            let r: Vec<f64> = w.iter().zip(&self.c).map(|(a, b)| a - b).collect();
            let ar: Vec<f64> = self.a.iter().map(|row| dot(row, &r)).collect();
            0.5 * dot(&r, &ar)
        }
        fn gradient(&self, w: &[f64], g: &mut [f64]) {
            let r: Vec<f64> = w.iter().zip(&self.c).map(|(a, b)| a - b).collect();
            for (gi, row) in g.iter_mut().zip(&self.a) {
                *gi = dot(row, &r);
            }
        }
    }

    fn quad() -> Quadratic {
        Quadratic {
            a: vec![
                vec![4.0, 1.0, 0.0, 0.5],
                vec![1.0, 3.0, 0.2, 0.0],
                vec![0.0, 0.2, 2.0, 0.3],
                vec![0.5, 0.0, 0.3, 1.0],
            ],
            c: vec![1.0, -2.0, 0.5, 3.0],
        }
    }

    #[test]
    fn converges_to_quadratic_minimizer() {
        let q = quad();
        let out = scg_minimize(
            &q,
            &[0.0; 4],
            &ScgSettings {
                gradient_tolerance: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.converged);
        for (w, c) in out.params.iter().zip(&q.c) {
            assert!((w - c).abs() < 1e-6, "{w} vs {c}");
        }
        assert!(out.cost_history.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn returns_init_when_already_stationary() {
        let q = quad();
        let out = scg_minimize(&q, &q.c, &ScgSettings::default()).unwrap();
        assert_eq!(out.params, q.c);
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
    }

    struct Blowup;
    impl Objective for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, w: &[f64]) -> f64 {
            if w[0] > 0.5 {
                f64::NAN
            } else {
                -w[0]
            }
        }
        fn gradient(&self, _w: &[f64], g: &mut [f64]) {
            g[0] = -1.0;
        }
    }

    #[test]
    fn non_finite_cost_is_divergence() {
        let err = scg_minimize(&Blowup, &[0.0], &ScgSettings::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration } if iteration >= 1));
    }
}
