//! Closed-loop simulation of synthetic plants, reference generation and
//! data-generating experiments.
mod closed_loop;
mod feedback;
mod plant;
mod reference;

use serde::{Deserialize, Serialize};

pub use closed_loop::{
    metrics, run_closed_loop, Dither, Feedforward, ModelFeedforward, RunOptions, ScenarioResult, StateSpaceFeedforward,
};
pub use feedback::{zoh, FeedbackLaw, TransferFunction};
pub use plant::{ClmParams, Plant, PlantParams, RotatingParams};
pub use reference::{make_reference, MoveLimits, ReferenceParams, ReferenceTrajectory, Segment};

use crate::data::IoLog;
use crate::error::Result;

/// Closed-loop excitation: a reference program (possibly repeated) with
/// white input dither over a fraction of the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub references: Vec<ReferenceParams>,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub dither_variance: f64,
    /// Dither is active from this fraction of the run to the end.
    #[serde(default)]
    pub dither_start: f64,
    pub seed: u64,
}

fn one() -> usize {
    1
}

/// Run the excitation without feedforward and return the sampled log.
pub fn generate_training_experiment(plant: &mut Plant, fb: &mut FeedbackLaw, ex: &ExcitationSpec) -> Result<IoLog> {
    let ts = plant.ts;
    let mut single = ReferenceTrajectory { ts, r: vec![], v: vec![], a: vec![] };
    for p in &ex.references {
        single = single.concat(&make_reference(p)?);
    }
    let full = single.repeat(ex.repetitions);
    let n = full.len();
    let from = ((ex.dither_start.clamp(0.0, 1.0)) * n as f64).round() as usize;
    let dither = (ex.dither_variance > 0.0).then_some(Dither { variance: ex.dither_variance, from, to: n, seed: ex.seed });
    if n == 0 {
        return IoLog::new(ts, vec![], vec![]);
    }
    let res = run_closed_loop(plant, fb, None, &full, &RunOptions { dither, ..RunOptions::default() })?;
    Ok(res.log())
}
