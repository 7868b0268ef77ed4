//! Browser bindings. Each exported call runs synchronously on the page's
//! thread; results come back as plain number arrays for canvas plotting.

use std::time::Duration;

use gear_tda::pipelines::{
    compare_to_direct, model1_train, model2_train, Model1Config, Model2Config, PipelineKind,
    TrainedModel,
};
use gear_tda::regressor::{RegressorConfig, RegressorKind};
use gear_tda::source::{CountingSource, RecordSetSource};
use gear_tda::synth::{life_schedule, synthesize_stage, GearSignalSpec, RecordSet};
use gear_tda::tda::{direct_tda, kurtosis, magnitude_spectrum, peak_value};
use wasm_bindgen::prelude::*;

type DemoResult<T> = Result<T, String>;

fn spec(points_per_rev: usize, seed: u64) -> GearSignalSpec {
    GearSignalSpec {
        points_per_rev,
        rng_seed: seed,
        ..GearSignalSpec::default()
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> DemoResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn stages(points_per_rev: usize, count: usize, seed: u64) -> DemoResult<Vec<RecordSet>> {
    life_schedule(&spec(points_per_rev, seed), count)
        .and_then(|specs| specs.iter().map(synthesize_stage).collect())
        .map_err(|e| e.to_string())
}

fn train(pipeline: &str, regressor: &str, rs: &RecordSet) -> DemoResult<TrainedModel> {
    let reg = RegressorConfig::default_for(parse::<RegressorKind>(regressor)?);
    let trained = match parse::<PipelineKind>(pipeline)? {
        PipelineKind::Model1 => model1_train(rs, &Model1Config::new(reg)),
        PipelineKind::Model2 => model2_train(rs, &Model2Config::new(reg)),
    };
    trained.map(|(m, _)| m).map_err(|e| e.to_string())
}

/// One synthesized stage: its direct average and spectrum.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct StageView {
    direct: Vec<f64>,
    spectrum: Vec<f64>,
    first_frame: Vec<f64>,
    kurtosis: f64,
    peak: f64,
}

#[wasm_bindgen]
impl StageView {
    #[wasm_bindgen(getter)]
    pub fn direct(&self) -> Vec<f64> {
        self.direct.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn spectrum(&self) -> Vec<f64> {
        self.spectrum.clone()
    }
    /// A single raw revolution, for showing how much averaging removes.
    #[wasm_bindgen(getter, js_name = firstFrame)]
    pub fn first_frame(&self) -> Vec<f64> {
        self.first_frame.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn kurtosis(&self) -> f64 {
        self.kurtosis
    }
    #[wasm_bindgen(getter)]
    pub fn peak(&self) -> f64 {
        self.peak
    }
}

pub fn stage_view(points_per_rev: usize, crack_severity: f64, seed: u64) -> DemoResult<StageView> {
    let s = GearSignalSpec {
        crack_severity,
        ..spec(points_per_rev, seed)
    };
    let rs = synthesize_stage(&s).map_err(|e| e.to_string())?;
    let direct = direct_tda(&rs, rs.frame_count()).map_err(|e| e.to_string())?;
    Ok(StageView {
        spectrum: magnitude_spectrum(&direct).map_err(|e| e.to_string())?,
        kurtosis: kurtosis(&direct).map_err(|e| e.to_string())?,
        peak: peak_value(&direct).map_err(|e| e.to_string())?,
        first_frame: rs.frames()[0].to_vec(),
        direct: direct.into_samples(),
    })
}

/// Synthesizes one record set and averages all of its revolutions.
#[wasm_bindgen]
pub fn synthesize(
    points_per_rev: usize,
    crack_severity: f64,
    seed: u64,
) -> Result<StageView, JsError> {
    stage_view(points_per_rev, crack_severity, seed).map_err(|e| JsError::new(&e))
}

/// A model trained on the healthy stage and applied to a later one.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct EstimateView {
    direct: Vec<f64>,
    estimate: Vec<f64>,
    eta: f64,
    frames_read: usize,
    storage_percent: f64,
}

#[wasm_bindgen]
impl EstimateView {
    #[wasm_bindgen(getter)]
    pub fn direct(&self) -> Vec<f64> {
        self.direct.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }
    /// Fit error in percent.
    #[wasm_bindgen(getter)]
    pub fn eta(&self) -> f64 {
        self.eta
    }
    #[wasm_bindgen(getter, js_name = framesRead)]
    pub fn frames_read(&self) -> usize {
        self.frames_read
    }
    /// Peak buffered data as a share of the record; NaN for Model 1.
    #[wasm_bindgen(getter, js_name = storagePercent)]
    pub fn storage_percent(&self) -> f64 {
        self.storage_percent
    }
}

pub fn estimate_view(
    pipeline: &str,
    regressor: &str,
    points_per_rev: usize,
    stage: usize,
    stage_count: usize,
    seed: u64,
) -> DemoResult<EstimateView> {
    let sets = stages(points_per_rev, stage_count, seed)?;
    let target = sets
        .get(stage)
        .ok_or_else(|| format!("stage {stage} is outside 0..{stage_count}"))?;
    let model = train(pipeline, regressor, &sets[0])?;
    let mut src = CountingSource::new(RecordSetSource::new(target));
    let (est, storage) = model.estimate(&mut src).map_err(|e| e.to_string())?;
    let frames_read = src.consumed();
    let r = compare_to_direct(&model, target, est, storage, Duration::ZERO)
        .map_err(|e| e.to_string())?;
    Ok(EstimateView {
        eta: r.fit.eta_sim_percent,
        storage_percent: storage.map_or(f64::NAN, |a| a.storage_fraction_percent),
        frames_read,
        direct: r.direct.into_samples(),
        estimate: r.estimate.into_samples(),
    })
}

/// Trains on stage 0 of a synthetic life sweep and estimates `stage`.
#[wasm_bindgen]
pub fn estimate(
    pipeline: &str,
    regressor: &str,
    points_per_rev: usize,
    stage: usize,
    stage_count: usize,
    seed: u64,
) -> Result<EstimateView, JsError> {
    estimate_view(
        pipeline,
        regressor,
        points_per_rev,
        stage,
        stage_count,
        seed,
    )
    .map_err(|e| JsError::new(&e))
}

/// Per-stage diagnostics of a model against direct averaging.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct SweepView {
    life: Vec<f64>,
    eta: Vec<f64>,
    kurtosis_direct: Vec<f64>,
    kurtosis_estimate: Vec<f64>,
    peak_direct: Vec<f64>,
    peak_estimate: Vec<f64>,
}

#[wasm_bindgen]
impl SweepView {
    #[wasm_bindgen(getter)]
    pub fn life(&self) -> Vec<f64> {
        self.life.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn eta(&self) -> Vec<f64> {
        self.eta.clone()
    }
    #[wasm_bindgen(getter, js_name = kurtosisDirect)]
    pub fn kurtosis_direct(&self) -> Vec<f64> {
        self.kurtosis_direct.clone()
    }
    #[wasm_bindgen(getter, js_name = kurtosisEstimate)]
    pub fn kurtosis_estimate(&self) -> Vec<f64> {
        self.kurtosis_estimate.clone()
    }
    #[wasm_bindgen(getter, js_name = peakDirect)]
    pub fn peak_direct(&self) -> Vec<f64> {
        self.peak_direct.clone()
    }
    #[wasm_bindgen(getter, js_name = peakEstimate)]
    pub fn peak_estimate(&self) -> Vec<f64> {
        self.peak_estimate.clone()
    }
}

pub fn sweep_view(
    pipeline: &str,
    regressor: &str,
    points_per_rev: usize,
    stage_count: usize,
    seed: u64,
) -> DemoResult<SweepView> {
    let sets = stages(points_per_rev, stage_count, seed)?;
    let model = train(pipeline, regressor, &sets[0])?;
    let mut v = SweepView::default();
    for rs in &sets {
        let (est, storage) = model
            .estimate(&mut RecordSetSource::new(rs))
            .map_err(|e| e.to_string())?;
        let r = compare_to_direct(&model, rs, est, storage, Duration::ZERO)
            .map_err(|e| e.to_string())?;
        v.life.push(r.life_fraction);
        v.eta.push(r.fit.eta_sim_percent);
        v.kurtosis_direct.push(r.kurtosis.0);
        v.kurtosis_estimate.push(r.kurtosis.1);
        v.peak_direct.push(r.peak.0);
        v.peak_estimate.push(r.peak.1);
    }
    Ok(v)
}

/// Kurtosis, peak and fit error over a whole synthetic life.
#[wasm_bindgen(js_name = lifeSweep)]
pub fn life_sweep(
    pipeline: &str,
    regressor: &str,
    points_per_rev: usize,
    stage_count: usize,
    seed: u64,
) -> Result<SweepView, JsError> {
    sweep_view(pipeline, regressor, points_per_rev, stage_count, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_view_is_consistent() {
        let v = stage_view(256, 0.8, 3).unwrap();
        assert_eq!(v.direct.len(), 256);
        assert_eq!(v.spectrum.len(), 129);
        assert_eq!(v.peak, v.direct.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        assert!(stage_view(256, 2.0, 3).is_err());
    }

    #[test]
    fn estimates_report_data_use() {
        let m1 = estimate_view("model1", "rbf", 256, 3, 4, 1).unwrap();
        assert_eq!(m1.frames_read, 40);
        assert!(m1.storage_percent.is_nan());
        assert_eq!(m1.estimate.len(), 256);
        let m2 = estimate_view("model2", "rbf", 256, 3, 4, 1).unwrap();
        assert_eq!(m2.frames_read, 160);
        assert_eq!(m2.storage_percent, 16.25);
        assert!(estimate_view("model1", "rbf", 256, 4, 4, 1).is_err());
        assert!(estimate_view("model3", "rbf", 256, 1, 4, 1).is_err());
    }

    #[test]
    fn sweep_covers_every_stage() {
        let v = sweep_view("model1", "rbf", 256, 3, 2).unwrap();
        assert_eq!(v.life, vec![0.0, 0.5, 1.0]);
        assert_eq!(v.eta.len(), 3);
        assert!(v.kurtosis_direct.iter().all(|k| *k > 0.0));
    }
}
