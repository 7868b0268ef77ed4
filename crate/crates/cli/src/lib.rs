//! Command-line harness around `gear_tda`: synthesis, training, estimation,
//! life-sweep evaluation and timing.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;

use config::{Cli, Command, RunConfig};
pub use error::{CliError, CliResult};

/// Runs one parsed command and returns the lines to print.
pub fn run(cli: &Cli) -> CliResult<Vec<String>> {
    let cfg = RunConfig::resolve(cli.command.flags())?;
    let mut lines = Vec::new();
    match &cli.command {
        Command::Synth(_) => {
            let entries = commands::cmd_synth(&cfg)?;
            for e in &entries {
                lines.push(format!(
                    "stage {:2}  life {:.3}  {}  {}",
                    e.stage, e.life_fraction, e.file, e.sha256
                ));
            }
            lines.push(format!(
                "wrote {} stages to {}",
                entries.len(),
                cfg.out.display()
            ));
        }
        Command::Train(_) => {
            let t = commands::cmd_train(&cfg)?;
            lines.push(format!(
                "trained {} on {} examples in {:.3} s",
                t.model.label(),
                t.summary.stage1_examples,
                t.train_time.as_secs_f64()
            ));
            if let Some(n) = t.support_vectors() {
                lines.push(format!("support vectors: {n}"));
            }
            lines.push(format!("model written to {}", t.model_path.display()));
        }
        Command::Estimate(_) => {
            for s in commands::cmd_estimate(&cfg)? {
                let mut line = format!("stage {:2}  read {} revolutions", s.stage, s.frames_read);
                if let Some(a) = s.storage {
                    line.push_str(&format!(
                        "  peak storage {:.2}%",
                        a.storage_fraction_percent
                    ));
                }
                line.push_str(&format!("  -> {}", s.path.display()));
                lines.push(line);
            }
        }
        Command::Evaluate(_) => {
            let out = commands::cmd_evaluate(&cfg)?;
            for r in &out.reports {
                lines.push(format!(
                    "stage {:2}  eta {:6.2}%  kurtosis {:.3}/{:.3}  peak {:.3}/{:.3}",
                    r.stage_index + 1,
                    r.fit.eta_sim_percent,
                    r.kurtosis.0,
                    r.kurtosis.1,
                    r.peak.0,
                    r.peak.1
                ));
            }
            lines.push(format!("report written to {}", out.table.display()));
        }
        Command::Bench(_) => {
            let report = commands::cmd_bench(&cfg)?;
            lines.push(format!(
                "{:<8} {:<5} {:>14} {:>12} {:>14}",
                "pipeline", "reg", "preprocess [s]", "train [s]", "simulate [s]"
            ));
            for r in &report.rows {
                let train = r
                    .training
                    .map(|t| format!("{t:.4}"))
                    .unwrap_or_else(|| "-".into());
                lines.push(format!(
                    "{:<8} {:<5} {:>14.4} {:>12} {:>14.4}",
                    r.pipeline, r.regressor, r.preprocessing, train, r.simulating
                ));
            }
        }
    }
    Ok(lines)
}
