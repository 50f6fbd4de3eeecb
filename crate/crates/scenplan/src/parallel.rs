//! Validation spread over the rayon pool. Every scenario comes from its own
//! random stream, so results do not depend on the number of threads.

use nalgebra::DVector;
use rayon::prelude::*;

use scenplan_core::engine::validation_set_risk;
use scenplan_core::occupancy::scenario_at;
use scenplan_core::{Experiment, OccupancyScenario, RiskEvaluator, RiskHistogram, Stream};

use crate::error::{AppError, Result};

pub fn validation_scenarios(exp: &Experiment, set: u64, size: usize) -> Vec<OccupancyScenario> {
    (0..size)
        .into_par_iter()
        .map(|i| scenario_at(exp.seed, Stream::Validation(set), i, exp.lifted.horizon, &exp.occupancy))
        .collect()
}

pub fn count_violations(eval: &RiskEvaluator, scenarios: &[OccupancyScenario]) -> Result<usize> {
    scenarios
        .par_iter()
        .map(|s| eval.violates(&s.flux).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
        .map_err(|e| AppError::from_core("evaluating validation scenarios", e))
}

pub fn risk_histogram(exp: &Experiment, u: &DVector<f64>, sets: usize, set_size: usize) -> Result<RiskHistogram> {
    let ctx = |e| AppError::from_core("validating solution", e);
    if sets == 0 || set_size == 0 {
        return Err(AppError::Usage("--sets and --set-size must be at least 1".into()));
    }
    let eval = exp.evaluator(u).map_err(ctx)?;
    let risks = (0..sets as u64)
        .into_par_iter()
        .map(|s| validation_set_risk(&eval, &exp.occupancy, exp.lifted.horizon, exp.seed, s, set_size))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(ctx)?;
    Ok(RiskHistogram::from_risks(risks))
}
