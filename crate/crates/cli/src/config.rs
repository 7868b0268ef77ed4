//! Flag and configuration-file handling.
//!
//! Every setting can come from a flag or from a flat TOML file passed with
//! `--config`; flags win. Missing settings fall back to defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gear_tda::pipelines::PipelineKind;
use gear_tda::regressor::RegressorKind;
use gear_tda::synth::GearSignalSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_STAGES: usize = 15;
pub const DEFAULT_REPS: usize = 5;

#[derive(Debug, Parser)]
#[command(
    name = "gear-tda",
    version,
    about = "Time domain averaging from reduced gear vibration data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a life sweep of synthetic record sets plus a manifest.
    Synth(Flags),
    /// Train one pipeline on the first stage of a dataset.
    Train(Flags),
    /// Estimate the TDA of every stage with a trained model.
    Estimate(Flags),
    /// Compare a trained model against direct averaging over gear life.
    Evaluate(Flags),
    /// Time preprocessing, training and simulation for every pipeline.
    Bench(Flags),
}

impl Command {
    pub fn flags(&self) -> &Flags {
        match self {
            Command::Synth(f)
            | Command::Train(f)
            | Command::Estimate(f)
            | Command::Evaluate(f)
            | Command::Bench(f) => f,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat TOML file with any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Synthesis seed for `synth`, training seed otherwise.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "1024|256")]
    pub points_per_rev: Option<usize>,
    #[arg(long, value_name = "model1|model2")]
    pub pipeline: Option<String>,
    #[arg(long, value_name = "mlp|rbf|svr")]
    pub regressor: Option<String>,
    /// Number of life stages to synthesize.
    #[arg(long)]
    pub stages: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Timed repetitions per benchmark cell.
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    points_per_rev: Option<usize>,
    pipeline: Option<String>,
    regressor: Option<String>,
    stages: Option<usize>,
    out: Option<PathBuf>,
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    reps: Option<usize>,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub points_per_rev: usize,
    pub pipeline: PipelineKind,
    pub regressor: RegressorKind,
    pub stages: usize,
    pub out: PathBuf,
    pub data: PathBuf,
    pub model: Option<PathBuf>,
    pub reps: usize,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| CliError::Config {
                    path: path.clone(),
                    reason: e.to_string(),
                })?
            }
            None => FileConfig::default(),
        };
        let pipeline = match flags.pipeline.clone().or(file.pipeline) {
            Some(p) => p.parse().map_err(|e| CliError::invalid("pipeline", e))?,
            None => PipelineKind::Model1,
        };
        let regressor = match flags.regressor.clone().or(file.regressor) {
            Some(r) => r.parse().map_err(|e| CliError::invalid("regressor", e))?,
            None => RegressorKind::Mlp,
        };
        // SVR datasets default to the coarser sampling
        let default_ppr = if regressor == RegressorKind::Svr {
            256
        } else {
            1024
        };
        let points_per_rev = flags
            .points_per_rev
            .or(file.points_per_rev)
            .unwrap_or(default_ppr);
        if points_per_rev != 256 && points_per_rev != 1024 {
            return Err(CliError::invalid(
                "points-per-rev",
                format!("{points_per_rev} is not one of 1024, 256"),
            ));
        }
        let stages = flags.stages.or(file.stages).unwrap_or(DEFAULT_STAGES);
        if stages < 2 {
            return Err(CliError::invalid(
                "stages",
                format!("{stages} is below the minimum of 2"),
            ));
        }
        let reps = flags.reps.or(file.reps).unwrap_or(DEFAULT_REPS);
        if reps < DEFAULT_REPS {
            return Err(CliError::invalid(
                "reps",
                format!("{reps} is below the minimum of {DEFAULT_REPS}"),
            ));
        }
        Ok(Self {
            seed: flags.seed.or(file.seed),
            points_per_rev,
            pipeline,
            regressor,
            stages,
            out: flags
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from(".")),
            data: flags
                .data
                .clone()
                .or(file.data)
                .unwrap_or_else(|| PathBuf::from("data")),
            model: flags.model.clone().or(file.model),
            reps,
        })
    }

    /// Base spec of the synthetic life sweep.
    pub fn base_spec(&self) -> GearSignalSpec {
        let mut spec = GearSignalSpec {
            points_per_rev: self.points_per_rev,
            ..GearSignalSpec::default()
        };
        if let Some(seed) = self.seed {
            spec.rng_seed = seed;
        }
        spec
    }

    pub fn model_path(&self) -> CliResult<&Path> {
        self.model
            .as_deref()
            .ok_or_else(|| CliError::invalid("model", "no model file given"))
    }
}
