//! A single interface over the three regressor kinds, with input/target
//! standardization and the versioned parameter blob.
//!
//! Blob layout (little-endian): `RGP1`, kind byte (0 MLP, 1 RBF, 2 SVR),
//! array count `u32`, then each array as `rows u32`, `cols u32` and
//! `rows * cols` `f64` values. Arrays, in order:
//!
//! * all kinds: input mean, input scale, `[target mean, target scale]`
//! * MLP: `[input_dim, hidden, output_dim]`, w1, b1, w2, b2
//! * RBF: centres, w2, b2
//! * SVR: `[epsilon, c, kernel_width, qp_tolerance, max_passes]`, support
//!   inputs, beta, `[bias]`

use crate::codec::ByteReader;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::nets::{self, MlpParams, RbfParams, TrainConfig};
use crate::svr::{self, SvrConfig, SvrParams};

pub const BLOB_MAGIC: [u8; 4] = *b"RGP1";

/// Anything that maps one input vector to one scalar.
pub trait Regressor {
    fn input_dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegressorKind {
    Mlp,
    Rbf,
    Svr,
}

impl RegressorKind {
    pub const ALL: [RegressorKind; 3] =
        [RegressorKind::Mlp, RegressorKind::Rbf, RegressorKind::Svr];

    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::Mlp => "mlp",
            RegressorKind::Rbf => "rbf",
            RegressorKind::Svr => "svr",
        }
    }

    fn code(self) -> u8 {
        match self {
            RegressorKind::Mlp => 0,
            RegressorKind::Rbf => 1,
            RegressorKind::Svr => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(RegressorKind::Mlp),
            1 => Ok(RegressorKind::Rbf),
            2 => Ok(RegressorKind::Svr),
            _ => Err(Error::Format(format!("unknown regressor kind {c}"))),
        }
    }
}

impl std::str::FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(RegressorKind::Mlp),
            "rbf" => Ok(RegressorKind::Rbf),
            "svr" | "svm" => Ok(RegressorKind::Svr),
            other => Err(Error::validation(
                "regressor",
                format!("unknown kind {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub hidden_units: usize,
    /// Standardized data are multiplied by this factor before training, which
    /// keeps the tanh units near their linear range and lets the net
    /// extrapolate past the training amplitudes.
    pub data_scale: f64,
    pub train: TrainConfig,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: 5,
            data_scale: 0.1,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfConfig {
    pub num_centers: usize,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            num_centers: 5,
            ridge: nets::DEFAULT_RIDGE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegressorConfig {
    Mlp(MlpConfig),
    Rbf(RbfConfig),
    Svr(SvrConfig),
}

impl RegressorConfig {
    pub fn default_for(kind: RegressorKind) -> Self {
        match kind {
            RegressorKind::Mlp => RegressorConfig::Mlp(MlpConfig::default()),
            RegressorKind::Rbf => RegressorConfig::Rbf(RbfConfig::default()),
            RegressorKind::Svr => RegressorConfig::Svr(SvrConfig::default()),
        }
    }

    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressorConfig::Mlp(_) => RegressorKind::Mlp,
            RegressorConfig::Rbf(_) => RegressorKind::Rbf,
            RegressorConfig::Svr(_) => RegressorKind::Svr,
        }
    }

    /// Reseeds the stochastic parts (MLP initialisation, k-means seeding).
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            RegressorConfig::Mlp(mut c) => {
                c.train.seed = seed;
                RegressorConfig::Mlp(c)
            }
            RegressorConfig::Rbf(mut c) => {
                c.seed = seed;
                RegressorConfig::Rbf(c)
            }
            svr @ RegressorConfig::Svr(_) => svr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressorConfig::Mlp(c) => {
                if c.hidden_units == 0 {
                    return Err(Error::validation("hidden_units", "must be at least 1"));
                }
                if !(c.data_scale.is_finite() && c.data_scale > 0.0) {
                    return Err(Error::validation("data_scale", "must be finite and > 0"));
                }
                c.train.validate()
            }
            RegressorConfig::Rbf(c) => {
                if c.num_centers == 0 {
                    return Err(Error::validation("num_centers", "must be at least 1"));
                }
                if !(c.ridge.is_finite() && c.ridge >= 0.0) {
                    return Err(Error::validation("ridge", "must be finite and >= 0"));
                }
                Ok(())
            }
            RegressorConfig::Svr(c) => c.validate(),
        }
    }
}

/// Per-feature affine standardization fitted on training data only.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
}

fn mean_and_scale(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    // constant columns pass through unscaled
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

impl Standardizer {
    pub fn fit(x: &Matrix, y: &[f64]) -> Self {
        let (input_mean, input_scale) = (0..x.cols())
            .map(|c| mean_and_scale(&x.iter_rows().map(|r| r[c]).collect::<Vec<_>>()))
            .unzip();
        let (target_mean, target_scale) = mean_and_scale(y);
        Self {
            input_mean,
            input_scale,
            target_mean,
            target_scale,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            input_mean: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            target_mean: 0.0,
            target_scale: 1.0,
        }
    }

    /// Multiplies every standardized quantity by `factor`.
    pub fn shrink(&mut self, factor: f64) {
        self.input_scale.iter_mut().for_each(|s| *s /= factor);
        self.target_scale /= factor;
    }

    pub fn input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_mean.iter().zip(&self.input_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inputs(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            let r = self.input(x.row(i));
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }

    pub fn target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_scale
    }

    pub fn restore(&self, y: f64) -> f64 {
        y * self.target_scale + self.target_mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpParams),
    Rbf(RbfParams),
    Svr(SvrParams),
}

/// Trained parameters of one regressor plus its data scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorParams {
    pub scaler: Standardizer,
    pub model: Model,
}

/// Training side information worth reporting.
#[derive(Debug, Clone, PartialEq)]
pub enum FitInfo {
    Mlp {
        iterations: usize,
        final_cost: f64,
        converged: bool,
    },
    Rbf,
    Svr(svr::SvrStatus),
}

impl RegressorParams {
    pub fn kind(&self) -> RegressorKind {
        match self.model {
            Model::Mlp(_) => RegressorKind::Mlp,
            Model::Rbf(_) => RegressorKind::Rbf,
            Model::Svr(_) => RegressorKind::Svr,
        }
    }

    /// Support vector count for SVR, `None` otherwise.
    pub fn support_count(&self) -> Option<usize> {
        match &self.model {
            Model::Svr(p) => Some(p.support_count()),
            _ => None,
        }
    }

    pub fn to_blob(&self) -> Vec<u8> {
        let mut arrays: Vec<(usize, usize, Vec<f64>)> = vec![
            row(self.scaler.input_mean.clone()),
            row(self.scaler.input_scale.clone()),
            row(vec![self.scaler.target_mean, self.scaler.target_scale]),
        ];
        match &self.model {
            Model::Mlp(p) => {
                arrays.push(row(vec![
                    p.input_dim as f64,
                    p.hidden_units as f64,
                    p.output_dim as f64,
                ]));
                arrays.push((p.hidden_units, p.input_dim, p.w1.clone()));
                arrays.push(row(p.b1.clone()));
                arrays.push((p.output_dim, p.hidden_units, p.w2.clone()));
                arrays.push(row(p.b2.clone()));
            }
            Model::Rbf(p) => {
                arrays.push(mat(&p.centers));
                arrays.push(mat(&p.w2));
                arrays.push(row(p.b2.clone()));
            }
            Model::Svr(p) => {
                let c = &p.config;
                arrays.push(row(vec![
                    c.epsilon,
                    c.c,
                    c.kernel_width,
                    c.qp_tolerance,
                    c.max_passes as f64,
                ]));
                arrays.push(mat(&p.support_inputs));
                arrays.push(row(p.beta.clone()));
                arrays.push(row(vec![p.bias]));
            }
        }
        let mut out = Vec::new();
        out.extend_from_slice(&BLOB_MAGIC);
        out.push(self.kind().code());
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for (r, c, data) in arrays {
            out.extend_from_slice(&(r as u32).to_le_bytes());
            out.extend_from_slice(&(c as u32).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "regressor blob");
        if r.take(4)? != BLOB_MAGIC {
            return Err(Error::Format("regressor blob has wrong magic".into()));
        }
        let kind = RegressorKind::from_code(r.u8()?)?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(16));
        for _ in 0..count {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format("array shape overflows".into()))?;
            let raw = r.take(
                n.checked_mul(8)
                    .ok_or_else(|| Error::Format("array too large".into()))?,
            )?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<_>>();
            arrays.push(Matrix::from_vec(rows, cols, data)?);
        }
        r.finish()?;
        let expected = match kind {
            RegressorKind::Mlp => 8,
            RegressorKind::Rbf => 6,
            RegressorKind::Svr => 7,
        };
        if arrays.len() != expected {
            return Err(Error::Format(format!(
                "{kind} blob has {} arrays, expected {expected}",
                arrays.len()
            )));
        }
        let mut it = arrays.into_iter();
        let mut next = || it.next().expect("array count checked");
        let input_mean = next().into_vec();
        let input_scale = next().into_vec();
        let target = next().into_vec();
        if target.len() != 2 || input_mean.len() != input_scale.len() {
            return Err(Error::Format("malformed standardization arrays".into()));
        }
        let scaler = Standardizer {
            input_mean,
            input_scale,
            target_mean: target[0],
            target_scale: target[1],
        };
        let model = match kind {
            RegressorKind::Mlp => {
                let dims = next().into_vec();
                if dims.len() != 3 {
                    return Err(Error::Format("malformed mlp shape array".into()));
                }
                let p = MlpParams {
                    input_dim: dims[0] as usize,
                    hidden_units: dims[1] as usize,
                    output_dim: dims[2] as usize,
                    w1: next().into_vec(),
                    b1: next().into_vec(),
                    w2: next().into_vec(),
                    b2: next().into_vec(),
                };
                p.validate()?;
                Model::Mlp(p)
            }
            RegressorKind::Rbf => {
                let p = RbfParams {
                    centers: next(),
                    w2: next(),
                    b2: next().into_vec(),
                };
                p.validate()?;
                Model::Rbf(p)
            }
            RegressorKind::Svr => {
                let c = next().into_vec();
                if c.len() != 5 {
                    return Err(Error::Format("malformed svr config array".into()));
                }
                let config = SvrConfig {
                    epsilon: c[0],
                    c: c[1],
                    kernel_width: c[2],
                    qp_tolerance: c[3],
                    max_passes: c[4] as usize,
                };
                let support_inputs = next();
                let beta = next().into_vec();
                let bias = next().into_vec();
                if bias.len() != 1 {
                    return Err(Error::Format("malformed svr bias".into()));
                }
                let p = SvrParams {
                    support_inputs,
                    beta,
                    bias: bias[0],
                    config,
                };
                p.validate()?;
                Model::Svr(p)
            }
        };
        let out = Self { scaler, model };
        check_dim(
            "standardization width",
            out.model_input_dim(),
            out.scaler.input_mean.len(),
        )?;
        Ok(out)
    }

    fn model_input_dim(&self) -> usize {
        match &self.model {
            Model::Mlp(p) => p.input_dim,
            Model::Rbf(p) => p.input_dim(),
            Model::Svr(p) => p.support_inputs.cols(),
        }
    }
}

fn row(v: Vec<f64>) -> (usize, usize, Vec<f64>) {
    (1, v.len(), v)
}

fn mat(m: &Matrix) -> (usize, usize, Vec<f64>) {
    (m.rows(), m.cols(), m.as_slice().to_vec())
}

impl Regressor for RegressorParams {
    fn input_dim(&self) -> usize {
        self.scaler.input_mean.len()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim("regressor input", self.input_dim(), x.len())?;
        let z = self.scaler.input(x);
        let out = match &self.model {
            Model::Mlp(p) => nets::mlp_forward(p, &z)?[0],
            Model::Rbf(p) => nets::rbf_forward(p, &z)?[0],
            Model::Svr(p) => svr::svr_predict(p, &z)?,
        };
        Ok(self.scaler.restore(out))
    }
}

/// Standardizes the data and trains the configured regressor on it.
pub fn fit_regressor(
    config: &RegressorConfig,
    x: &Matrix,
    y: &[f64],
) -> Result<(RegressorParams, FitInfo)> {
    config.validate()?;
    check_dim("training rows", x.rows(), y.len())?;
    if x.rows() == 0 {
        return Err(Error::validation("training rows", "no training examples"));
    }
    let mut scaler = Standardizer::fit(x, y);
    if let RegressorConfig::Mlp(c) = config {
        scaler.shrink(c.data_scale);
    }
    let xs = scaler.inputs(x);
    let ys: Vec<f64> = y.iter().map(|v| scaler.target(*v)).collect();
    let (model, info) = match config {
        RegressorConfig::Mlp(c) => {
            let targets = Matrix::column(ys);
            let (p, out) = nets::mlp_train(&xs, &targets, c.hidden_units, &c.train)?;
            let info = FitInfo::Mlp {
                iterations: out.iterations,
                final_cost: *out.cost_history.last().unwrap_or(&f64::NAN),
                converged: out.converged,
            };
            (Model::Mlp(p), info)
        }
        RegressorConfig::Rbf(c) => {
            let targets = Matrix::column(ys);
            let p = nets::rbf_train(&xs, &targets, c.num_centers, c.seed, c.ridge)?;
            (Model::Rbf(p), FitInfo::Rbf)
        }
        RegressorConfig::Svr(c) => {
            let t = svr::svr_train(&xs, &ys, c)?;
            (Model::Svr(t.params), FitInfo::Svr(t.status))
        }
    };
    Ok((RegressorParams { scaler, model }, info))
}
