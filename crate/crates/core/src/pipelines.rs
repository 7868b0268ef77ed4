//! The two estimation pipelines.
//!
//! *Model 1* maps the synchronous samples of the first `input_frames`
//! revolutions straight to the full average: one training example per
//! angular sample index, input = that sample across the revolutions,
//! target = the direct average over all `total_frames` revolutions.
//!
//! *Model 2* estimates the mean of each `subsection_size`-revolution block
//! with a shared stage-1 regressor, discarding raw revolutions as soon as the
//! block is processed, then maps the block estimates to the full average
//! with a stage-2 regressor.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::codec::ByteReader;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::regressor::{
    fit_regressor, FitInfo, Regressor, RegressorConfig, RegressorKind, RegressorParams,
};
use crate::source::{FrameSource, RecordSetSource};
use crate::synth::{RecordSet, RevolutionFrame};
use crate::tda::{
    average_frames, direct_tda, eta_sim, kurtosis, magnitude_spectrum, peak_value, FitReport,
    TdaSignal, TdaSource,
};

pub const MODEL_MAGIC: [u8; 4] = *b"TMD1";
pub const MODEL_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineKind {
    Model1,
    Model2,
}

impl PipelineKind {
    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::Model1 => "model1",
            PipelineKind::Model2 => "model2",
        }
    }
}

impl std::fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model1" | "1" => Ok(PipelineKind::Model1),
            "model2" | "2" => Ok(PipelineKind::Model2),
            other => Err(Error::validation(
                "pipeline",
                format!("unknown pipeline {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model1Config {
    pub input_frames: usize,
    pub total_frames: usize,
    pub regressor: RegressorConfig,
}

impl Model1Config {
    pub fn new(regressor: RegressorConfig) -> Self {
        Self {
            input_frames: 40,
            total_frames: 160,
            regressor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_frames == 0 || self.input_frames > self.total_frames {
            return Err(Error::validation(
                "input_frames",
                format!("{} is outside 1..={}", self.input_frames, self.total_frames),
            ));
        }
        self.regressor.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model2Config {
    pub subsection_size: usize,
    pub total_frames: usize,
    pub regressor: RegressorConfig,
}

impl Model2Config {
    pub fn new(regressor: RegressorConfig) -> Self {
        Self {
            subsection_size: 10,
            total_frames: 160,
            regressor,
        }
    }

    pub fn subsections(&self) -> usize {
        self.total_frames / self.subsection_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsection_size < 2 {
            return Err(Error::validation("subsection_size", "must be at least 2"));
        }
        if self.total_frames == 0 || self.total_frames % self.subsection_size != 0 {
            return Err(Error::validation(
                "subsection_size",
                format!(
                    "{} does not divide total_frames {}",
                    self.subsection_size, self.total_frames
                ),
            ));
        }
        self.regressor.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: PipelineKind,
    pub stage1: RegressorParams,
    pub stage2: Option<RegressorParams>,
    pub points_per_rev: usize,
    /// Revolutions per Model 1 input, or per Model 2 subsection.
    pub frames_per_input: usize,
    pub total_frames: usize,
}

/// Peak memory use of a streamed Model 2 estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageAudit {
    pub peak_frames_resident: usize,
    pub peak_waveforms_resident: usize,
    pub total_frames_consumed: usize,
    pub storage_fraction_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub stage1: FitInfo,
    pub stage2: Option<FitInfo>,
    pub stage1_examples: usize,
    pub stage1_input_dim: usize,
}

fn require_frames(rs: &RecordSet, needed: usize) -> Result<()> {
    if rs.frame_count() < needed {
        return Err(Error::InsufficientFrames {
            needed,
            available: rs.frame_count(),
        });
    }
    Ok(())
}

/// Rows are angular positions, columns are the given revolutions.
pub fn synchronous_matrix(frames: &[RevolutionFrame], points_per_rev: usize) -> Matrix {
    let mut m = Matrix::zeros(points_per_rev, frames.len());
    for (c, f) in frames.iter().enumerate() {
        for (k, v) in f.iter().enumerate() {
            m.set(k, c, *v);
        }
    }
    m
}

/// Training examples for Model 1: inputs from the first `input_frames`
/// revolutions, targets from the direct average over `total_frames`.
pub fn model1_dataset(
    rs: &RecordSet,
    input_frames: usize,
    total_frames: usize,
) -> Result<(Matrix, Vec<f64>)> {
    require_frames(rs, total_frames)?;
    if input_frames == 0 || input_frames > total_frames {
        return Err(Error::validation(
            "input_frames",
            "must lie in 1..=total_frames",
        ));
    }
    let x = synchronous_matrix(&rs.frames()[..input_frames], rs.points_per_rev());
    let y = direct_tda(rs, total_frames)?.into_samples();
    Ok((x, y))
}

/// Stage-1 examples for Model 2, pooled over every subsection.
pub fn model2_stage1_dataset(rs: &RecordSet, cfg: &Model2Config) -> Result<(Matrix, Vec<f64>)> {
    require_frames(rs, cfg.total_frames)?;
    let ppr = rs.points_per_rev();
    let m = cfg.subsection_size;
    let mut x = Matrix::zeros(cfg.subsections() * ppr, m);
    let mut y = Vec::with_capacity(cfg.subsections() * ppr);
    for s in 0..cfg.subsections() {
        let block = &rs.frames()[s * m..(s + 1) * m];
        let sync = synchronous_matrix(block, ppr);
        for k in 0..ppr {
            x.row_mut(s * ppr + k).copy_from_slice(sync.row(k));
        }
        y.extend(average_frames(block.iter().map(|f| &f[..]), ppr)?);
    }
    Ok((x, y))
}

pub fn model1_train(
    train_rs: &RecordSet,
    cfg: &Model1Config,
) -> Result<(TrainedModel, TrainingSummary)> {
    cfg.validate()?;
    let (x, y) = model1_dataset(train_rs, cfg.input_frames, cfg.total_frames)?;
    let (stage1, info) = fit_regressor(&cfg.regressor, &x, &y)?;
    Ok((
        TrainedModel {
            kind: PipelineKind::Model1,
            stage1,
            stage2: None,
            points_per_rev: train_rs.points_per_rev(),
            frames_per_input: cfg.input_frames,
            total_frames: cfg.total_frames,
        },
        TrainingSummary {
            stage1: info,
            stage2: None,
            stage1_examples: x.rows(),
            stage1_input_dim: x.cols(),
        },
    ))
}

pub fn model2_train(
    train_rs: &RecordSet,
    cfg: &Model2Config,
) -> Result<(TrainedModel, TrainingSummary)> {
    cfg.validate()?;
    let ppr = train_rs.points_per_rev();
    let (x1, y1) = model2_stage1_dataset(train_rs, cfg)?;
    let (stage1, info1) = fit_regressor(&cfg.regressor, &x1, &y1)?;

    // stage 2 learns from what stage 1 actually produces
    let mut x2 = Matrix::zeros(ppr, cfg.subsections());
    for s in 0..cfg.subsections() {
        for k in 0..ppr {
            x2.set(k, s, stage1.predict(x1.row(s * ppr + k))?);
        }
    }
    let y2 = direct_tda(train_rs, cfg.total_frames)?.into_samples();
    let (stage2, info2) = fit_regressor(
        &cfg.regressor.with_seed(seed_of(&cfg.regressor) ^ 0x2),
        &x2,
        &y2,
    )?;
    Ok((
        TrainedModel {
            kind: PipelineKind::Model2,
            stage1,
            stage2: Some(stage2),
            points_per_rev: ppr,
            frames_per_input: cfg.subsection_size,
            total_frames: cfg.total_frames,
        },
        TrainingSummary {
            stage1: info1,
            stage2: Some(info2),
            stage1_examples: x1.rows(),
            stage1_input_dim: x1.cols(),
        },
    ))
}

fn seed_of(cfg: &RegressorConfig) -> u64 {
    match cfg {
        RegressorConfig::Mlp(c) => c.train.seed,
        RegressorConfig::Rbf(c) => c.seed,
        RegressorConfig::Svr(_) => 0,
    }
}

fn pull_frame(
    source: &mut impl FrameSource,
    needed: usize,
    consumed: usize,
) -> Result<RevolutionFrame> {
    let ppr = source.points_per_rev();
    match source.next_frame()? {
        Some(f) => {
            check_dim("frame length", ppr, f.len())?;
            Ok(f)
        }
        None => Err(Error::InsufficientFrames {
            needed,
            available: consumed,
        }),
    }
}

/// Pulls exactly `input_frames` revolutions and evaluates `reg` at every
/// angular position.
pub fn estimate_model1<R: Regressor>(
    reg: &R,
    input_frames: usize,
    source: &mut impl FrameSource,
) -> Result<Vec<f64>> {
    check_dim("model 1 input width", reg.input_dim(), input_frames)?;
    let ppr = source.points_per_rev();
    let mut frames = Vec::with_capacity(input_frames);
    for i in 0..input_frames {
        frames.push(pull_frame(source, input_frames, i)?);
    }
    let x = synchronous_matrix(&frames, ppr);
    x.iter_rows().map(|r| reg.predict(r)).collect()
}

/// Streams `total_frames` revolutions through the two-stage estimator,
/// holding at most one subsection of raw revolutions at a time.
pub fn estimate_model2_stream<R1: Regressor, R2: Regressor>(
    stage1: &R1,
    stage2: &R2,
    subsection_size: usize,
    total_frames: usize,
    source: &mut impl FrameSource,
) -> Result<(Vec<f64>, StorageAudit)> {
    if subsection_size == 0 || total_frames % subsection_size != 0 {
        return Err(Error::validation(
            "subsection_size",
            "must divide total_frames",
        ));
    }
    check_dim("stage 1 input width", stage1.input_dim(), subsection_size)?;
    check_dim(
        "stage 2 input width",
        stage2.input_dim(),
        total_frames / subsection_size,
    )?;
    let ppr = source.points_per_rev();
    let mut buffer: Vec<RevolutionFrame> = Vec::with_capacity(subsection_size);
    let mut block_estimates: Vec<Vec<f64>> = Vec::with_capacity(total_frames / subsection_size);
    let (mut peak_frames, mut peak_waveforms, mut peak_total) = (0, 0, 0);
    let mut note = |frames: usize, waves: usize| {
        peak_frames = peak_frames.max(frames);
        peak_waveforms = peak_waveforms.max(waves);
        peak_total = peak_total.max(frames + waves);
    };
    for consumed in 0..total_frames {
        buffer.push(pull_frame(source, total_frames, consumed)?);
        note(buffer.len(), block_estimates.len());
        if buffer.len() == subsection_size {
            let sync = synchronous_matrix(&buffer, ppr);
            let est = sync
                .iter_rows()
                .map(|r| stage1.predict(r))
                .collect::<Result<Vec<f64>>>()?;
            block_estimates.push(est);
            // the raw block is still held while its estimate is stored
            note(buffer.len(), block_estimates.len());
            buffer.clear();
        }
    }
    let mut out = Vec::with_capacity(ppr);
    let mut input = vec![0.0; block_estimates.len()];
    for k in 0..ppr {
        for (v, b) in input.iter_mut().zip(&block_estimates) {
            *v = b[k];
        }
        out.push(stage2.predict(&input)?);
    }
    let audit = StorageAudit {
        peak_frames_resident: peak_frames,
        peak_waveforms_resident: peak_waveforms,
        total_frames_consumed: total_frames,
        storage_fraction_percent: 100.0 * (peak_total * ppr) as f64 / (total_frames * ppr) as f64,
    };
    Ok((out, audit))
}

impl TrainedModel {
    pub fn regressor_kind(&self) -> RegressorKind {
        self.stage1.kind()
    }

    /// Revolutions one estimate consumes.
    pub fn frames_consumed(&self) -> usize {
        match self.kind {
            PipelineKind::Model1 => self.frames_per_input,
            PipelineKind::Model2 => self.total_frames,
        }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.kind, self.regressor_kind())
    }

    fn check_source(&self, source: &impl FrameSource) -> Result<()> {
        check_dim(
            "points per revolution",
            self.points_per_rev,
            source.points_per_rev(),
        )
    }

    pub fn model1_estimate(&self, source: &mut impl FrameSource) -> Result<TdaSignal> {
        if self.kind != PipelineKind::Model1 {
            return Err(Error::validation("model", "not a Model 1 pipeline"));
        }
        self.check_source(source)?;
        let est = estimate_model1(&self.stage1, self.frames_per_input, source)?;
        TdaSignal::new(est, TdaSource::Model1Estimate)
    }

    pub fn model2_estimate_stream(
        &self,
        source: &mut impl FrameSource,
    ) -> Result<(TdaSignal, StorageAudit)> {
        let stage2 = match (&self.stage2, self.kind) {
            (Some(s), PipelineKind::Model2) => s,
            _ => return Err(Error::validation("model", "not a Model 2 pipeline")),
        };
        self.check_source(source)?;
        let (est, audit) = estimate_model2_stream(
            &self.stage1,
            stage2,
            self.frames_per_input,
            self.total_frames,
            source,
        )?;
        Ok((TdaSignal::new(est, TdaSource::Model2Estimate)?, audit))
    }

    /// Runs whichever pipeline this is; the audit is only present for Model 2.
    pub fn estimate(
        &self,
        source: &mut impl FrameSource,
    ) -> Result<(TdaSignal, Option<StorageAudit>)> {
        match self.kind {
            PipelineKind::Model1 => Ok((self.model1_estimate(source)?, None)),
            PipelineKind::Model2 => {
                let (s, a) = self.model2_estimate_stream(source)?;
                Ok((s, Some(a)))
            }
        }
    }

    /// `TMD1`, version `u16`, pipeline byte, points per revolution `u32`,
    /// frames per input `u32`, total frames `u32`, then the stage-1 blob and
    /// an optional stage-2 blob, each prefixed by a `u64` byte length (the
    /// stage-2 one by a presence byte as well).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(match self.kind {
            PipelineKind::Model1 => 1,
            PipelineKind::Model2 => 2,
        });
        for v in [
            self.points_per_rev,
            self.frames_per_input,
            self.total_frames,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        let push_blob = |out: &mut Vec<u8>, p: &RegressorParams| {
            let b = p.to_blob();
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(&b);
        };
        push_blob(&mut out, &self.stage1);
        match &self.stage2 {
            Some(s) => {
                out.push(1);
                push_blob(&mut out, s);
            }
            None => out.push(0),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "model file");
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Format("model file has wrong magic".into()));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {version}"
            )));
        }
        let kind = match r.u8()? {
            1 => PipelineKind::Model1,
            2 => PipelineKind::Model2,
            k => return Err(Error::Format(format!("unknown pipeline kind {k}"))),
        };
        let mut u32s = [0usize; 3];
        for v in &mut u32s {
            *v = r.u32()? as usize;
        }
        let blob = |r: &mut ByteReader| -> Result<RegressorParams> {
            let n = usize::try_from(r.u64()?)
                .map_err(|_| Error::Format("blob length overflows".into()))?;
            RegressorParams::from_blob(r.take(n)?)
        };
        let stage1 = blob(&mut r)?;
        let stage2 = match r.u8()? {
            0 => None,
            1 => Some(blob(&mut r)?),
            b => return Err(Error::Format(format!("bad stage-2 marker {b}"))),
        };
        r.finish()?;
        let [points_per_rev, frames_per_input, total_frames] = u32s;
        let model = Self {
            kind,
            stage1,
            stage2,
            points_per_rev,
            frames_per_input,
            total_frames,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.stage2) {
            (PipelineKind::Model1, None) => check_dim(
                "model 1 input width",
                self.frames_per_input,
                self.stage1.input_dim(),
            ),
            (PipelineKind::Model2, Some(s2)) => {
                if self.frames_per_input == 0 || self.total_frames % self.frames_per_input != 0 {
                    return Err(Error::Format(
                        "subsection size does not divide total frames".into(),
                    ));
                }
                check_dim(
                    "stage 1 input width",
                    self.frames_per_input,
                    self.stage1.input_dim(),
                )?;
                check_dim(
                    "stage 2 input width",
                    self.total_frames / self.frames_per_input,
                    s2.input_dim(),
                )
            }
            (PipelineKind::Model1, Some(_)) => {
                Err(Error::Format("Model 1 carries a stage-2 regressor".into()))
            }
            (PipelineKind::Model2, None) => {
                Err(Error::Format("Model 2 lacks its stage-2 regressor".into()))
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Comparison of one model's estimate with the direct average at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub model_label: String,
    pub pipeline: PipelineKind,
    pub regressor: RegressorKind,
    pub stage_index: u16,
    pub life_fraction: f64,
    pub fit: FitReport,
    pub direct: TdaSignal,
    pub estimate: TdaSignal,
    /// (direct, estimate)
    pub kurtosis: (f64, f64),
    /// (direct, estimate)
    pub peak: (f64, f64),
    pub spectrum_direct: Vec<f64>,
    pub spectrum_estimate: Vec<f64>,
    pub storage: Option<StorageAudit>,
    /// Wall-clock time of the estimate; excluded from equality-sensitive
    /// outputs.
    pub simulate_time: Duration,
}

/// Builds the report for one stage from an already computed estimate.
pub fn compare_to_direct(
    model: &TrainedModel,
    stage: &RecordSet,
    estimate: TdaSignal,
    storage: Option<StorageAudit>,
    simulate_time: Duration,
) -> Result<EvaluationReport> {
    let direct = direct_tda(stage, model.total_frames)?;
    let fit = eta_sim(&direct, &estimate)?;
    Ok(EvaluationReport {
        model_label: model.label(),
        pipeline: model.kind,
        regressor: model.regressor_kind(),
        stage_index: stage.stage_index,
        life_fraction: stage.life_fraction,
        kurtosis: (kurtosis(&direct)?, kurtosis(&estimate)?),
        peak: (peak_value(&direct)?, peak_value(&estimate)?),
        spectrum_direct: magnitude_spectrum(&direct)?,
        spectrum_estimate: magnitude_spectrum(&estimate)?,
        fit,
        direct,
        estimate,
        storage,
        simulate_time,
    })
}

/// One report per (model, stage), models outermost.
pub fn evaluate_over_life(
    models: &[TrainedModel],
    stages: &[RecordSet],
) -> Result<Vec<EvaluationReport>> {
    let mut out = Vec::with_capacity(models.len() * stages.len());
    for model in models {
        for stage in stages {
            require_frames(stage, model.total_frames)?;
            let t0 = Instant::now();
            let (estimate, storage) = model.estimate(&mut RecordSetSource::new(stage))?;
            let elapsed = t0.elapsed();
            out.push(compare_to_direct(model, stage, estimate, storage, elapsed)?);
        }
    }
    Ok(out)
}
