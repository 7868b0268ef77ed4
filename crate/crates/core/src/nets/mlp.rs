use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scg::{scg_minimize, Objective, ScgOutcome, ScgSettings};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

/// Weights of a two-layer perceptron with tanh hidden units and a linear
/// output layer. Matrices are row-major: `w1` is hidden x input and `w2` is
/// output x hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Weight-decay coefficient applied to every weight and bias.
    pub weight_decay: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weight_decay: 1.5,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::validation("weight_decay", "must be finite and >= 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations", "must be at least 1"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::validation("gradient_tolerance", "must be positive"));
        }
        Ok(())
    }
}

impl MlpParams {
    pub fn zeros(input_dim: usize, hidden_units: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_units,
            output_dim,
            w1: vec![0.0; hidden_units * input_dim],
            b1: vec![0.0; hidden_units],
            w2: vec![0.0; output_dim * hidden_units],
            b2: vec![0.0; output_dim],
        }
    }

    /// Uniform initialisation in +-1/sqrt(fan_in) for each layer.
    pub fn random(input_dim: usize, hidden_units: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(input_dim, hidden_units, output_dim);
        let r1 = 1.0 / (input_dim.max(1) as f64).sqrt();
        let r2 = 1.0 / (hidden_units.max(1) as f64).sqrt();
        p.w1.iter_mut()
            .chain(p.b1.iter_mut())
            .for_each(|w| *w = rng.random_range(-r1..=r1));
        p.w2.iter_mut()
            .chain(p.b2.iter_mut())
            .for_each(|w| *w = rng.random_range(-r2..=r2));
        p
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flattens as `w1, b1, w2, b2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        check_dim("mlp parameter vector", self.param_count(), flat.len())?;
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        Ok(Self {
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: b2.to_vec(),
            ..*self
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("mlp w1", self.hidden_units * self.input_dim, self.w1.len())?;
        check_dim("mlp b1", self.hidden_units, self.b1.len())?;
        check_dim("mlp w2", self.output_dim * self.hidden_units, self.w2.len())?;
        check_dim("mlp b2", self.output_dim, self.b2.len())?;
        if self.to_flat().iter().any(|w| !w.is_finite()) {
            return Err(Error::validation("mlp parameters", "non-finite weight"));
        }
        Ok(())
    }

    fn shape(&self) -> Shape {
        Shape {
            d: self.input_dim,
            m: self.hidden_units,
            k: self.output_dim,
        }
    }
}

#[derive(Clone, Copy)]
struct Shape {
    d: usize,
    m: usize,
    k: usize,
}

impl Shape {
    fn split<'a>(&self, flat: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = flat.split_at(self.m * self.d);
        let (b1, rest) = rest.split_at(self.m);
        let (w2, b2) = rest.split_at(self.k * self.m);
        (w1, b1, w2, b2)
    }

    fn hidden(&self, w1: &[f64], b1: &[f64], x: &[f64], z: &mut [f64]) {
        for (j, zj) in z.iter_mut().enumerate() {
            let row = &w1[j * self.d..(j + 1) * self.d];
            let a: f64 = b1[j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
            *zj = a.tanh();
        }
    }

    fn output(&self, w2: &[f64], b2: &[f64], z: &[f64], y: &mut [f64]) {
        for (k, yk) in y.iter_mut().enumerate() {
            let row = &w2[k * self.m..(k + 1) * self.m];
            *yk = b2[k] + row.iter().zip(z).map(|(w, zj)| w * zj).sum::<f64>();
        }
    }
}

/// y_k = b2_k + sum_j w2_kj tanh(b1_j + sum_i w1_ji x_i)
pub fn mlp_forward(p: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    check_dim("mlp input", p.input_dim, x.len())?;
    let s = p.shape();
    let mut z = vec![0.0; s.m];
    let mut y = vec![0.0; s.k];
    s.hidden(&p.w1, &p.b1, x, &mut z);
    s.output(&p.w2, &p.b2, &z, &mut y);
    Ok(y)
}

fn check_data(p: &MlpParams, x: &Matrix, y: &Matrix) -> Result<()> {
    check_dim("training rows", x.rows(), y.rows())?;
    check_dim("training inputs", p.input_dim, x.cols())?;
    check_dim("training targets", p.output_dim, y.cols())
}

/// Sum-of-squares error plus weight decay over the data set.
pub struct MlpObjective<'a> {
    shape: Shape,
    x: &'a Matrix,
    y: &'a Matrix,
    decay: f64,
}

impl<'a> MlpObjective<'a> {
    pub fn new(template: &MlpParams, x: &'a Matrix, y: &'a Matrix, decay: f64) -> Result<Self> {
        check_data(template, x, y)?;
        Ok(Self {
            shape: template.shape(),
            x,
            y,
            decay,
        })
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        let s = self.shape;
        s.m * s.d + s.m + s.k * s.m + s.k
    }

    fn value(&self, w: &[f64]) -> f64 {
        let s = self.shape;
        let (w1, b1, w2, b2) = s.split(w);
        let mut z = vec![0.0; s.m];
        let mut out = vec![0.0; s.k];
        let mut sse = 0.0;
        for (x, t) in self.x.iter_rows().zip(self.y.iter_rows()) {
            s.hidden(w1, b1, x, &mut z);
            s.output(w2, b2, &z, &mut out);
            sse += out
                .iter()
                .zip(t)
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>();
        }
        0.5 * sse + 0.5 * self.decay * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], grad: &mut [f64]) {
        let s = self.shape;
        let (w1, b1, w2, b2) = s.split(w);
        let (g1, rest) = grad.split_at_mut(s.m * s.d);
        let (gb1, rest) = rest.split_at_mut(s.m);
        let (g2, gb2) = rest.split_at_mut(s.k * s.m);
        g1.fill(0.0);
        gb1.fill(0.0);
        g2.fill(0.0);
        gb2.fill(0.0);
        let mut z = vec![0.0; s.m];
        let mut out = vec![0.0; s.k];
        let mut dh = vec![0.0; s.m];
        for (x, t) in self.x.iter_rows().zip(self.y.iter_rows()) {
            s.hidden(w1, b1, x, &mut z);
            s.output(w2, b2, &z, &mut out);
            dh.fill(0.0);
            for k in 0..s.k {
                let dk = out[k] - t[k];
                gb2[k] += dk;
                for j in 0..s.m {
                    g2[k * s.m + j] += dk * z[j];
                    dh[j] += w2[k * s.m + j] * dk;
                }
            }
            for j in 0..s.m {
                let dj = dh[j] * (1.0 - z[j] * z[j]);
                gb1[j] += dj;
                for (g, xi) in g1[j * s.d..(j + 1) * s.d].iter_mut().zip(x) {
                    *g += dj * xi;
                }
            }
        }
        for (g, v) in grad.iter_mut().zip(w) {
            *g += self.decay * v;
        }
    }
}

/// 0.5 * sum of squared residuals + 0.5 * decay * sum of squared parameters.
pub fn mlp_cost(p: &MlpParams, x: &Matrix, y: &Matrix, decay: f64) -> Result<f64> {
    Ok(MlpObjective::new(p, x, y, decay)?.value(&p.to_flat()))
}

/// Analytic gradient of [`mlp_cost`], shaped like the parameters.
pub fn mlp_gradient(p: &MlpParams, x: &Matrix, y: &Matrix, decay: f64) -> Result<MlpParams> {
    let obj = MlpObjective::new(p, x, y, decay)?;
    let mut g = vec![0.0; obj.dim()];
    obj.gradient(&p.to_flat(), &mut g);
    p.with_flat(&g)
}

/// Trains `init` by scaled conjugate gradient on the regularised cost.
pub fn scg_train(
    init: &MlpParams,
    x: &Matrix,
    y: &Matrix,
    cfg: &TrainConfig,
) -> Result<(MlpParams, ScgOutcome)> {
    cfg.validate()?;
    init.validate()?;
    let obj = MlpObjective::new(init, x, y, cfg.weight_decay)?;
    let settings = ScgSettings {
        max_iterations: cfg.max_iterations,
        gradient_tolerance: cfg.gradient_tolerance,
        ..ScgSettings::default()
    };
    let out = scg_minimize(&obj, &init.to_flat(), &settings)?;
    Ok((init.with_flat(&out.params)?, out))
}

/// Seeded initialisation followed by [`scg_train`].
pub fn mlp_train(
    x: &Matrix,
    y: &Matrix,
    hidden_units: usize,
    cfg: &TrainConfig,
) -> Result<(MlpParams, ScgOutcome)> {
    if hidden_units == 0 {
        return Err(Error::validation("hidden_units", "must be at least 1"));
    }
    let init = MlpParams::random(x.cols(), hidden_units, y.cols(), cfg.seed);
    scg_train(&init, x, y, cfg)
}
