use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_dist, Matrix};

/// Ridge applied to the output layer solve.
pub const DEFAULT_RIDGE: f64 = 1e-8;
const KMEANS_ITERATIONS: usize = 50;

/// Radial basis network with thin-plate-spline units and a linear output
/// layer. `w2` is output x centers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfParams {
    pub centers: Matrix,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl RbfParams {
    pub fn input_dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.b2.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("rbf output weights", self.centers.rows(), self.w2.cols())?;
        check_dim("rbf biases", self.w2.rows(), self.b2.len())?;
        if self.centers.as_slice().iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("centers", "non-finite centre"));
        }
        Ok(())
    }
}

/// phi(r) = r^2 ln r, with phi(0) = 0.
pub fn thin_plate(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// Uses r^2 ln r = 0.5 r^2 ln r^2 to avoid the square root.
fn thin_plate_sq(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

/// Activations of every basis function at `x`.
pub fn rbf_basis(centers: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    check_dim("rbf input", centers.cols(), x.len())?;
    Ok(basis_unchecked(centers, x))
}

fn basis_unchecked(centers: &Matrix, x: &[f64]) -> Vec<f64> {
    centers
        .iter_rows()
        .map(|c| thin_plate_sq(sq_dist(c, x)))
        .collect()
}

/// y_k(x) = sum_j w_kj phi_j(x) + b_k
pub fn rbf_forward(p: &RbfParams, x: &[f64]) -> Result<Vec<f64>> {
    let phi = rbf_basis(&p.centers, x)?;
    Ok(p.w2
        .iter_rows()
        .zip(&p.b2)
        .map(|(w, b)| b + w.iter().zip(&phi).map(|(w, f)| w * f).sum::<f64>())
        .collect())
}

/// k-means++ seeding followed by Lloyd iterations, all seeded.
pub fn kmeans_centers(x: &Matrix, k: usize, seed: u64) -> Result<Matrix> {
    let n = x.rows();
    if k == 0 {
        return Err(Error::validation("num_centers", "must be at least 1"));
    }
    if k > n {
        return Err(Error::validation(
            "num_centers",
            format!("{k} exceeds the {n} training rows"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(x.row(first));
    let mut nearest: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(x.row(pick));
        for (d, r) in nearest.iter_mut().zip(x.iter_rows()) {
            *d = d.min(sq_dist(r, centers.row(c)));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..KMEANS_ITERATIONS {
        let mut changed = false;
        for (a, r) in assign.iter_mut().zip(x.iter_rows()) {
            let best = (0..k)
                .map(|c| (c, sq_dist(r, centers.row(c))))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
                .0;
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for (a, r) in assign.iter().zip(x.iter_rows()) {
            counts[*a] += 1;
            for (s, v) in sums.row_mut(*a).iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centre
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    Ok(centers)
}

/// Second training stage: solves min ||Phi w - Y||^2 + ridge ||w||^2 for the
/// output weights and biases with the centres held fixed.
pub fn rbf_fit_output(centers: &Matrix, x: &Matrix, y: &Matrix, ridge: f64) -> Result<RbfParams> {
    check_dim("training rows", x.rows(), y.rows())?;
    check_dim("training inputs", centers.cols(), x.cols())?;
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::validation("ridge", "must be finite and >= 0"));
    }
    let (n, m, k) = (x.rows(), centers.rows(), y.cols());
    let cols = m + 1;
    // [Phi 1; sqrt(ridge) I] stacked so a plain least-squares solve carries the ridge
    let mut a = DMatrix::<f64>::zeros(n + cols, cols);
    for (i, r) in x.iter_rows().enumerate() {
        for (j, phi) in basis_unchecked(centers, r).into_iter().enumerate() {
            a[(i, j)] = phi;
        }
        a[(i, m)] = 1.0;
    }
    let s = ridge.sqrt();
    for j in 0..cols {
        a[(n + j, j)] = s;
    }
    let mut b = DMatrix::<f64>::zeros(n + cols, k);
    for (i, r) in y.iter_rows().enumerate() {
        for (c, v) in r.iter().enumerate() {
            b[(i, c)] = *v;
        }
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 0.0)
        .map_err(|e| Error::validation("rbf design matrix", e.to_string()))?;
    let mut w2 = Matrix::zeros(k, m);
    let mut b2 = vec![0.0; k];
    for c in 0..k {
        for j in 0..m {
            w2.set(c, j, sol[(j, c)]);
        }
        b2[c] = sol[(m, c)];
    }
    let p = RbfParams {
        centers: centers.clone(),
        w2,
        b2,
    };
    if p.w2.as_slice().iter().chain(&p.b2).any(|w| !w.is_finite()) {
        return Err(Error::validation(
            "rbf design matrix",
            "solve produced non-finite weights",
        ));
    }
    Ok(p)
}

/// Two-stage training: centres from the inputs alone, then the output layer.
pub fn rbf_train(
    x: &Matrix,
    y: &Matrix,
    num_centers: usize,
    seed: u64,
    ridge: f64,
) -> Result<RbfParams> {
    check_dim("training rows", x.rows(), y.rows())?;
    let centers = kmeans_centers(x, num_centers, seed)?;
    rbf_fit_output(&centers, x, y, ridge)
}
