//! Trains every pipeline/regressor pair on the first synthetic life stage and
//! prints fit and diagnostic agreement at each validation stage.

use std::time::Instant;

use gear_tda::pipelines::{
    evaluate_over_life, model1_train, model2_train, Model1Config, Model2Config, PipelineKind,
};
use gear_tda::regressor::{RegressorConfig, RegressorKind};
use gear_tda::synth::{life_schedule, synthesize_stage, GearSignalSpec};

fn main() -> gear_tda::Result<()> {
    for kind in RegressorKind::ALL {
        let ppr = if kind == RegressorKind::Svr {
            256
        } else {
            1024
        };
        let base = GearSignalSpec {
            points_per_rev: ppr,
            ..GearSignalSpec::default()
        };
        let stages = life_schedule(&base, 15)?
            .iter()
            .map(synthesize_stage)
            .collect::<gear_tda::Result<Vec<_>>>()?;
        for pipeline in [PipelineKind::Model1, PipelineKind::Model2] {
            let reg = RegressorConfig::default_for(kind);
            let t0 = Instant::now();
            let (model, summary) = match pipeline {
                PipelineKind::Model1 => model1_train(&stages[0], &Model1Config::new(reg))?,
                PipelineKind::Model2 => model2_train(&stages[0], &Model2Config::new(reg))?,
            };
            let train = t0.elapsed();
            let reports = evaluate_over_life(std::slice::from_ref(&model), &stages)?;
            println!(
                "{} trained in {:.2?} ({:?})",
                model.label(),
                train,
                summary.stage1
            );
            for r in &reports {
                println!(
                    "  stage {:2} eta {:6.2}%  kurt {:.3}/{:.3}  peak {:.3}/{:.3}",
                    r.stage_index,
                    r.fit.eta_sim_percent,
                    r.kurtosis.0,
                    r.kurtosis.1,
                    r.peak.0,
                    r.peak.1
                );
            }
        }
    }
    Ok(())
}
