use std::path::Path;

use crate::error::{CliError, CliResult};

/// Writes a header row followed by `rows`.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Median durations in seconds for one pipeline/regressor pair, or for
/// direct averaging (no training phase).
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub pipeline: String,
    pub regressor: String,
    pub preprocessing: f64,
    pub training: Option<f64>,
    pub simulating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub points_per_rev: usize,
    pub reps: usize,
    pub rows: Vec<TimingRow>,
}

impl TimingReport {
    pub fn direct(&self) -> &TimingRow {
        &self.rows[0]
    }

    pub fn row(&self, pipeline: &str, regressor: &str) -> Option<&TimingRow> {
        self.rows
            .iter()
            .find(|r| r.pipeline == pipeline && r.regressor == regressor)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_csv(
            path,
            &[
                "pipeline",
                "regressor",
                "preprocessing_s",
                "training_s",
                "simulating_s",
            ],
            self.rows.iter().map(|r| {
                vec![
                    r.pipeline.clone(),
                    r.regressor.clone(),
                    format!("{:.6}", r.preprocessing),
                    r.training.map(|t| format!("{t:.6}")).unwrap_or_default(),
                    format!("{:.6}", r.simulating),
                ]
            }),
        )
    }
}
