//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use gear_tda::linalg::Matrix;
use gear_tda::synth::RecordSet;
use nalgebra::{DMatrix, DVector};

/// Per-sample mean written as a plain double loop, sample-major.
pub fn elementwise_mean(rs: &RecordSet, n: usize) -> Vec<f64> {
    let ppr = rs.points_per_rev();
    let mut out = Vec::with_capacity(ppr);
    for k in 0..ppr {
        let mut s = 0.0;
        for r in 0..n {
            s += rs.frames()[r][k];
        }
        out.push(s / n as f64);
    }
    out
}

/// max_k |a_k - b_k| / max_k |b_k|
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

pub fn erbf(x: &[f64], z: &[f64], sigma: f64) -> f64 {
    let d: f64 = x
        .iter()
        .zip(z)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    (-d / (2.0 * sigma * sigma)).exp()
}

pub fn gram(x: &Matrix, sigma: f64) -> Vec<Vec<f64>> {
    (0..x.rows())
        .map(|i| {
            (0..x.rows())
                .map(|j| erbf(x.row(i), x.row(j), sigma))
                .collect()
        })
        .collect()
}

/// SVR dual in terms of beta = alpha - alpha*, valid when alpha_i alpha*_i = 0.
pub fn dual_in_beta(beta: &[f64], k: &[Vec<f64>], y: &[f64], eps: f64) -> f64 {
    let n = beta.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * k[i][j];
        }
    }
    let lin: f64 = beta.iter().zip(y).map(|(b, y)| b * y).sum();
    let tube: f64 = beta.iter().map(|b| b.abs()).sum();
    lin - eps * tube - 0.5 * quad
}

/// Best dual value over beta on the grid {-C, -C + C/100, ..., C}^n with
/// sum beta = 0. The first n - 2 coordinates are enumerated; the dual is
/// concave along the remaining feasible line, so that coordinate is found by
/// a discrete ternary search. Returns (value, beta).
pub fn svr_grid_oracle(k: &[Vec<f64>], y: &[f64], eps: f64, c: f64) -> (f64, Vec<f64>) {
    const STEPS: i64 = 100;
    let n = y.len();
    assert!((2..=5).contains(&n));
    let h = c / STEPS as f64;
    let outer = n - 2;
    let mut idx = vec![-STEPS; outer];
    let vkv = k[n - 2][n - 2] + k[n - 1][n - 1] - 2.0 * k[n - 2][n - 1];
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    loop {
        let s: i64 = idx.iter().sum();
        let lo = (-STEPS).max(-STEPS - s);
        let hi = STEPS.min(STEPS - s);
        if lo <= hi {
            // beta(t) = base + t v with v = e_{n-2} - e_{n-1}
            let mut base = vec![0.0; n];
            for (b, i) in base.iter_mut().zip(&idx) {
                *b = *i as f64 * h;
            }
            let big_s = s as f64 * h;
            base[n - 1] = -big_s;
            let lin0: f64 = base.iter().zip(y).map(|(b, y)| b * y).sum();
            let abs0: f64 = base[..outer].iter().map(|b| b.abs()).sum();
            let mut quad0 = 0.0;
            let mut cross = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad0 += base[i] * k[i][j] * base[j];
                }
                cross += (k[n - 2][i] - k[n - 1][i]) * base[i];
            }
            let vy = y[n - 2] - y[n - 1];
            let eval = |ti: i64| {
                let t = ti as f64 * h;
                lin0 + t * vy
                    - eps * (abs0 + t.abs() + (big_s + t).abs())
                    - 0.5 * (quad0 + 2.0 * t * cross + t * t * vkv)
            };
            let (mut a, mut b) = (lo, hi);
            while b - a > 2 {
                let m1 = a + (b - a) / 3;
                let m2 = b - (b - a) / 3;
                if eval(m1) < eval(m2) {
                    a = m1 + 1;
                } else {
                    b = m2;
                }
            }
            for t in a..=b {
                let v = eval(t);
                if v > best.0 {
                    let mut bb = base.clone();
                    bb[n - 2] = t as f64 * h;
                    bb[n - 1] = -(s + t) as f64 * h;
                    best = (v, bb);
                }
            }
        }
        // odometer over the outer coordinates
        let mut p = 0;
        while p < outer {
            idx[p] += 1;
            if idx[p] <= STEPS {
                break;
            }
            idx[p] = -STEPS;
            p += 1;
        }
        if p == outer {
            break;
        }
    }
    best
}

/// Exact SVR dual optimum by enumerating, for every point, whether beta_i
/// sits at -C, strictly between -C and 0, at 0, strictly between 0 and C, or
/// at C. Free coordinates solve the stationarity system together with the
/// equality constraint. Returns (value, beta, bias) where the bias is the
/// multiplier of the equality constraint when some coordinate is strictly
/// inside its box.
pub fn svr_active_set_oracle(
    k: &[Vec<f64>],
    y: &[f64],
    eps: f64,
    c: f64,
) -> (f64, Vec<f64>, Option<f64>) {
    let n = y.len();
    assert!(n <= 8);
    let tol = 1e-12;
    let mut best: (f64, Vec<f64>, Option<f64>) = (f64::NEG_INFINITY, vec![], None);
    let total = 5usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut rem = code;
        for s in state.iter_mut() {
            *s = (rem % 5) as u8;
            rem /= 5;
        }
        let mut beta = vec![0.0; n];
        let mut free = Vec::new();
        for i in 0..n {
            match state[i] {
                0 => beta[i] = -c,
                4 => beta[i] = c,
                2 => beta[i] = 0.0,
                _ => free.push(i),
            }
        }
        let fixed_sum: f64 = beta.iter().sum();
        let mut bias = None;
        if free.is_empty() {
            if fixed_sum.abs() > tol {
                continue;
            }
        } else {
            let f = free.len();
            let mut a = DMatrix::<f64>::zeros(f + 1, f + 1);
            let mut rhs = DVector::<f64>::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                let sign = if state[i] == 3 { 1.0 } else { -1.0 };
                let mut v = y[i] - eps * sign;
                for j in 0..n {
                    if !free.contains(&j) {
                        v -= k[i][j] * beta[j];
                    }
                }
                for (cidx, &j) in free.iter().enumerate() {
                    a[(r, cidx)] = k[i][j];
                }
                a[(r, f)] = 1.0;
                rhs[r] = v;
                a[(f, r)] = 1.0;
            }
            rhs[f] = -fixed_sum;
            let Some(sol) = a.lu().solve(&rhs) else {
                continue;
            };
            let mut ok = true;
            let mut interior = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                let inside = if state[i] == 3 {
                    v > -tol && v < c + tol
                } else {
                    v < tol && v > -c - tol
                };
                ok &= inside;
                interior &= v.abs() > 1e-9 && v.abs() < c - 1e-9;
                beta[i] = v.clamp(-c, c);
            }
            if !ok {
                continue;
            }
            // on a bound the bias is only pinned to an interval
            bias = interior.then_some(sol[f]);
        }
        let v = dual_in_beta(&beta, k, y, eps);
        if v > best.0 {
            best = (v, beta, bias);
        }
    }
    best
}

/// Output weights and bias of an RBF layer from the normal equations
/// (A^T A + ridge I) w = A^T y with A = [Phi 1].
pub fn rbf_normal_equations(phi: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
    let n = phi.len();
    let m = phi[0].len() + 1;
    let a = DMatrix::from_fn(n, m, |i, j| if j + 1 == m { 1.0 } else { phi[i][j] });
    let lhs = a.transpose() * &a + DMatrix::identity(m, m) * ridge;
    let rhs = a.transpose() * DVector::from_column_slice(y);
    lhs.lu()
        .solve(&rhs)
        .expect("normal equations are singular")
        .iter()
        .copied()
        .collect()
}

/// Thin-plate spline written out independently: r^2 ln r, zero at r = 0.
pub fn tps(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}
