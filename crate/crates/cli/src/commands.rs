use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gear_tda::pipelines::{
    evaluate_over_life, model1_train, model2_train, synchronous_matrix, EvaluationReport,
    Model1Config, Model2Config, PipelineKind, StorageAudit, TrainedModel, TrainingSummary,
};
use gear_tda::regressor::{RegressorConfig, RegressorKind};
use gear_tda::source::{CountingSource, RecordSetSource};
use gear_tda::synth::{
    life_schedule, read_recordset, read_recordset_prefix, synthesize_stage, write_recordset,
    FileFrameSource,
};
use gear_tda::tda::direct_tda;

use crate::config::RunConfig;
use crate::dataset::{file_sha256, stage_file_name, write_manifest, Dataset, ManifestEntry};
use crate::error::{CliError, CliResult};
use crate::report::{write_csv, TimingReport, TimingRow};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes one record-set file per life stage and the manifest.
pub fn cmd_synth(cfg: &RunConfig) -> CliResult<Vec<ManifestEntry>> {
    let specs = life_schedule(&cfg.base_spec(), cfg.stages)?;
    create_dir(&cfg.out)?;
    let mut entries = Vec::with_capacity(specs.len());
    for spec in &specs {
        let stage = usize::from(spec.stage_index) + 1;
        let file = stage_file_name(stage);
        let path = cfg.out.join(&file);
        let rs = synthesize_stage(spec)?;
        write_recordset(&rs, &path).map_err(|e| CliError::data(&path, e))?;
        entries.push(ManifestEntry {
            stage,
            life_fraction: spec.life_fraction,
            file,
            sha256: file_sha256(&path)?,
        });
    }
    write_manifest(&cfg.out, &entries)?;
    Ok(entries)
}

pub fn regressor_config(cfg: &RunConfig) -> RegressorConfig {
    let reg = RegressorConfig::default_for(cfg.regressor);
    match cfg.seed {
        Some(seed) => reg.with_seed(seed),
        None => reg,
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub model: TrainedModel,
    pub summary: TrainingSummary,
    pub train_time: Duration,
}

impl TrainOutcome {
    /// Support vectors of every SVR stage, summed.
    pub fn support_vectors(&self) -> Option<usize> {
        let first = self.model.stage1.support_count()?;
        Some(
            first
                + self
                    .model
                    .stage2
                    .as_ref()
                    .and_then(|s| s.support_count())
                    .unwrap_or(0),
        )
    }
}

pub fn train_pipeline(
    pipeline: PipelineKind,
    reg: RegressorConfig,
    rs: &gear_tda::synth::RecordSet,
) -> gear_tda::Result<(TrainedModel, TrainingSummary)> {
    match pipeline {
        PipelineKind::Model1 => model1_train(rs, &Model1Config::new(reg)),
        PipelineKind::Model2 => model2_train(rs, &Model2Config::new(reg)),
    }
}

/// Trains the configured pipeline on the first stage of the dataset.
pub fn cmd_train(cfg: &RunConfig) -> CliResult<TrainOutcome> {
    let data = Dataset::open(&cfg.data)?;
    let path = data.training_path();
    let rs = read_recordset(&path).map_err(|e| CliError::data(&path, e))?;
    let t0 = Instant::now();
    let (model, summary) = train_pipeline(cfg.pipeline, regressor_config(cfg), &rs)?;
    let train_time = t0.elapsed();
    create_dir(&cfg.out)?;
    let model_path = cfg.out.join(format!("{}.tmd", model.label()));
    model
        .save(&model_path)
        .map_err(|e| CliError::data(&model_path, e))?;
    Ok(TrainOutcome {
        model_path,
        model,
        summary,
        train_time,
    })
}

fn load_model(cfg: &RunConfig) -> CliResult<TrainedModel> {
    let path = cfg.model_path()?;
    TrainedModel::load(path).map_err(|e| CliError::data(path, e))
}

#[derive(Debug, Clone)]
pub struct StageEstimate {
    pub stage: usize,
    pub path: PathBuf,
    pub frames_read: usize,
    pub storage: Option<StorageAudit>,
}

/// Streams every stage file through the model, reading only the revolutions
/// the pipeline needs.
pub fn cmd_estimate(cfg: &RunConfig) -> CliResult<Vec<StageEstimate>> {
    let model = load_model(cfg)?;
    let data = Dataset::open(&cfg.data)?;
    create_dir(&cfg.out)?;
    let mut out = Vec::with_capacity(data.entries.len());
    for entry in &data.entries {
        let input = data.path_of(entry);
        let file = FileFrameSource::open(&input).map_err(|e| CliError::data(&input, e))?;
        let mut src = CountingSource::new(file);
        let (est, storage) = model
            .estimate(&mut src)
            .map_err(|e| CliError::data(&input, e))?;
        let path = cfg.out.join(format!(
            "estimate_{}_stage_{:02}.csv",
            model.label(),
            entry.stage
        ));
        write_csv(
            &path,
            &["sample", "estimate"],
            est.samples()
                .iter()
                .enumerate()
                .map(|(k, v)| vec![k.to_string(), v.to_string()]),
        )?;
        out.push(StageEstimate {
            stage: entry.stage,
            path,
            frames_read: src.consumed(),
            storage,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EvaluationOutput {
    pub reports: Vec<EvaluationReport>,
    pub table: PathBuf,
    pub overlays: Vec<PathBuf>,
    pub spectra: Vec<PathBuf>,
}

pub const EVAL_HEADER: [&str; 7] = [
    "stage",
    "life_fraction",
    "eta_sim_percent",
    "kurtosis_direct",
    "kurtosis_estimate",
    "peak_direct",
    "peak_estimate",
];

/// Per-stage metrics plus the overlay and spectrum data behind each plot.
pub fn write_evaluation(out: &Path, reports: Vec<EvaluationReport>) -> CliResult<EvaluationOutput> {
    create_dir(out)?;
    let label = reports
        .first()
        .map(|r| r.model_label.clone())
        .unwrap_or_default();
    let table = out.join(format!("eval_{label}.csv"));
    write_csv(
        &table,
        &EVAL_HEADER,
        reports.iter().map(|r| {
            vec![
                (usize::from(r.stage_index) + 1).to_string(),
                r.life_fraction.to_string(),
                r.fit.eta_sim_percent.to_string(),
                r.kurtosis.0.to_string(),
                r.kurtosis.1.to_string(),
                r.peak.0.to_string(),
                r.peak.1.to_string(),
            ]
        }),
    )?;
    let mut overlays = Vec::new();
    let mut spectra = Vec::new();
    for r in &reports {
        let stage = usize::from(r.stage_index) + 1;
        let overlay = out.join(format!("overlay_{}_stage_{stage:02}.csv", r.model_label));
        write_csv(
            &overlay,
            &["sample", "direct", "estimate"],
            r.direct
                .samples()
                .iter()
                .zip(r.estimate.samples())
                .enumerate()
                .map(|(k, (d, e))| vec![k.to_string(), d.to_string(), e.to_string()]),
        )?;
        let spectrum = out.join(format!("spectrum_{}_stage_{stage:02}.csv", r.model_label));
        write_csv(
            &spectrum,
            &["order", "direct", "estimate"],
            r.spectrum_direct
                .iter()
                .zip(&r.spectrum_estimate)
                .enumerate()
                .map(|(k, (d, e))| vec![k.to_string(), d.to_string(), e.to_string()]),
        )?;
        overlays.push(overlay);
        spectra.push(spectrum);
    }
    Ok(EvaluationOutput {
        reports,
        table,
        overlays,
        spectra,
    })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<EvaluationOutput> {
    let model = load_model(cfg)?;
    let stages = Dataset::open(&cfg.data)?.load_all()?;
    let reports = evaluate_over_life(std::slice::from_ref(&model), &stages)?;
    write_evaluation(&cfg.out, reports)
}

fn median(mut times: Vec<f64>) -> f64 {
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    }
}

fn timed<T>(f: &mut impl FnMut() -> CliResult<T>) -> CliResult<(T, f64)> {
    let t0 = Instant::now();
    let v = std::hint::black_box(f()?);
    Ok((v, t0.elapsed().as_secs_f64()))
}

/// Runs `f` once untimed, then returns that warm-up result with the median
/// wall-clock time of `reps` further runs.
pub fn warm_median<T>(reps: usize, mut f: impl FnMut() -> CliResult<T>) -> CliResult<(T, f64)> {
    let first = f()?;
    let times = (0..reps)
        .map(|_| timed(&mut f).map(|r| r.1))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((first, median(times)))
}

pub fn median_time<T>(reps: usize, f: impl FnMut() -> CliResult<T>) -> CliResult<f64> {
    warm_median(reps, f).map(|r| r.1)
}

/// Loads what one estimate needs from disk and arranges it as regressor
/// inputs.
fn preprocess(path: &Path, model: &TrainedModel) -> CliResult<usize> {
    let err = |e| CliError::data(path, e);
    let ppr = model.points_per_rev;
    match model.kind {
        PipelineKind::Model1 => {
            let rs = read_recordset_prefix(path, model.frames_per_input).map_err(err)?;
            Ok(synchronous_matrix(rs.frames(), ppr).rows())
        }
        PipelineKind::Model2 => {
            let rs = read_recordset(path).map_err(err)?;
            let blocks: Vec<_> = rs.frames()[..model.total_frames]
                .chunks(model.frames_per_input)
                .map(|b| synchronous_matrix(b, ppr))
                .collect();
            Ok(blocks.len())
        }
    }
}

/// Times direct averaging and every (pipeline, regressor) pair on the
/// training stage of the dataset. Preprocessing is loading the revolutions a
/// method needs and arranging them as a frames-by-samples matrix.
pub fn cmd_bench(cfg: &RunConfig) -> CliResult<TimingReport> {
    let data = Dataset::open(&cfg.data)?;
    let path = data.training_path();
    let rs = read_recordset(&path).map_err(|e| CliError::data(&path, e))?;
    let total = Model1Config::new(RegressorConfig::default_for(RegressorKind::Mlp)).total_frames;
    let mut rows = vec![TimingRow {
        pipeline: "direct".into(),
        regressor: "-".into(),
        preprocessing: median_time(cfg.reps, || {
            let rs = read_recordset(&path).map_err(|e| CliError::data(&path, e))?;
            Ok(synchronous_matrix(rs.frames(), rs.points_per_rev()).rows())
        })?,
        training: None,
        simulating: median_time(cfg.reps, || Ok(direct_tda(&rs, total)?))?,
    }];
    for pipeline in [PipelineKind::Model1, PipelineKind::Model2] {
        for kind in RegressorKind::ALL {
            let reg = RegressorConfig::default_for(kind);
            let reg = match cfg.seed {
                Some(s) => reg.with_seed(s),
                None => reg,
            };
            let ((model, _), training) =
                warm_median(cfg.reps, || Ok(train_pipeline(pipeline, reg, &rs)?))?;
            rows.push(TimingRow {
                pipeline: pipeline.to_string(),
                regressor: kind.to_string(),
                preprocessing: median_time(cfg.reps, || preprocess(&path, &model))?,
                training: Some(training),
                simulating: median_time(cfg.reps, || {
                    Ok(model.estimate(&mut RecordSetSource::new(&rs))?)
                })?,
            });
        }
    }
    let report = TimingReport {
        points_per_rev: rs.points_per_rev(),
        reps: cfg.reps,
        rows,
    };
    create_dir(&cfg.out)?;
    report.write(&cfg.out.join("timing.csv"))?;
    Ok(report)
}
