//! Scenario programs over the lifted building dynamics, the deterministic,
//! standard and incremental methods, and empirical risk.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::LiftedDynamics;
use crate::occupancy::{
    mean_flux, sample_occupancy, scenario_at, FluxProfile, OccupancyModel, OccupancyScenario, Stream,
};
use crate::qp::{
    active_constraints, count_support_groups, solve_qp, ConstraintRow, KktResiduals, RowTag, ScenarioProgram,
    SolveResult, SolveStatus, SolverOptions,
};
use crate::sizing::{incremental_entry, standard_sample_size, RiskParams, SizingMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComfortLimit {
    /// Zone temperatures must stay at or below `t_max_c`.
    Summer { t_max_c: f64 },
    /// Zone temperatures must stay at or above `t_min_c`.
    Winter { t_min_c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComfortSpec {
    pub limit: ComfortLimit,
    pub epsilon: f64,
}

impl ComfortSpec {
    pub fn summer(t_max_c: f64, epsilon: f64) -> Self {
        ComfortSpec {
            limit: ComfortLimit::Summer { t_max_c },
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::validation("comfort.epsilon", "must lie in (0, 1)"));
        }
        let t = self.bound();
        if !t.is_finite() {
            return Err(Error::validation("comfort limit", "must be finite"));
        }
        Ok(())
    }

    fn bound(&self) -> f64 {
        match self.limit {
            ComfortLimit::Summer { t_max_c } => t_max_c,
            ComfortLimit::Winter { t_min_c } => t_min_c,
        }
    }

    /// `+1` when the limit is an upper bound, `-1` for a lower bound.
    fn sign(&self) -> f64 {
        match self.limit {
            ComfortLimit::Summer { .. } => 1.0,
            ComfortLimit::Winter { .. } => -1.0,
        }
    }
}

/// Per-step box on each input, repeated over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct InputLimits {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for InputLimits {
    /// Blinds in `[0, 0.9]`, heating and cooling flux in `[0, 1000]` W/m².
    fn default() -> Self {
        InputLimits {
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![0.9, 1000.0, 1000.0],
        }
    }
}

/// `E[Xᵀ Q X] + Uᵀ R U` with per-step weights `Q` (state) and `R` (input).
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub state_weight: Option<DMatrix<f64>>,
    pub input_weight: DMatrix<f64>,
}

impl Objective {
    /// `Q = 0`, `R = I`: minimum actuation effort.
    pub fn minimum_effort(n_inputs: usize) -> Self {
        Objective {
            state_weight: None,
            input_weight: DMatrix::identity(n_inputs, n_inputs),
        }
    }
}

fn block_diagonal(block: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let n = block.nrows();
    let mut out = DMatrix::zeros(n * count, n * count);
    for k in 0..count {
        out.view_mut((k * n, k * n), (n, n)).copy_from(block);
    }
    out
}

/// Zone-temperature rows of the lifted dynamics, in step-major order
/// (`k * zones + z`), with the comfort limit folded into a sign.
#[derive(Debug, Clone)]
struct ComfortRows {
    base: DVector<f64>,
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    sign: f64,
    bound: f64,
}

impl ComfortRows {
    fn new(lifted: &LiftedDynamics, comfort: &ComfortSpec) -> Self {
        let nz = lifted.n_zones();
        let rows: Vec<usize> = (0..lifted.horizon)
            .flat_map(|k| (0..nz).map(move |z| (k, z)))
            .map(|(k, z)| lifted.zone_row(z, k))
            .collect();
        let free = lifted.free_response();
        ComfortRows {
            base: DVector::from_iterator(rows.len(), rows.iter().map(|&r| free[r])),
            g: lifted.g.select_rows(rows.iter()),
            h: lifted.h.select_rows(rows.iter()),
            sign: comfort.sign(),
            bound: comfort.bound(),
        }
    }

    fn len(&self) -> usize {
        self.base.len()
    }

    fn disturbance_response(&self, flux: &[f64]) -> Result<DVector<f64>> {
        Error::check_dim("scenario flux", self.h.ncols(), flux.len())?;
        Ok(&self.h * DVector::from_column_slice(flux))
    }
}

/// Checks a fixed decision against occupancy scenarios.
#[derive(Debug, Clone)]
pub struct RiskEvaluator {
    rows: ComfortRows,
    /// Zone temperatures under zero occupancy.
    controlled: DVector<f64>,
    tolerance: f64,
}

impl RiskEvaluator {
    pub fn new(u: &DVector<f64>, lifted: &LiftedDynamics, comfort: &ComfortSpec) -> Result<Self> {
        comfort.validate()?;
        Error::check_dim("decision", lifted.decision_dim(), u.len())?;
        let rows = ComfortRows::new(lifted, comfort);
        let controlled = &rows.base + &rows.g * u;
        Ok(RiskEvaluator {
            rows,
            controlled,
            tolerance: SolverOptions::default().feasibility_tol,
        })
    }

    /// Zone temperatures, step-major, under the given occupancy.
    pub fn zone_temperatures(&self, flux: &[f64]) -> Result<DVector<f64>> {
        Ok(&self.controlled + self.rows.disturbance_response(flux)?)
    }

    /// Largest comfort-limit excess over all zones and steps, in °C.
    pub fn max_excess(&self, flux: &[f64]) -> Result<f64> {
        let temps = self.zone_temperatures(flux)?;
        Ok(temps
            .iter()
            .map(|t| self.rows.sign * (t - self.rows.bound))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn violates(&self, flux: &[f64]) -> Result<bool> {
        Ok(self.max_excess(flux)? > self.tolerance)
    }

    pub fn count_violations<S: FluxProfile>(&self, scenarios: &[S]) -> Result<usize> {
        let mut n = 0;
        for s in scenarios {
            n += usize::from(self.violates(s.flux())?);
        }
        Ok(n)
    }
}

/// Fraction of `validation` scenarios with any comfort row violated.
pub fn empirical_risk<S: FluxProfile>(
    u: &DVector<f64>,
    lifted: &LiftedDynamics,
    comfort: &ComfortSpec,
    validation: &[S],
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::validation("validation", "empty validation set"));
    }
    let eval = RiskEvaluator::new(u, lifted, comfort)?;
    Ok(eval.count_violations(validation)? as f64 / validation.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskHistogram {
    pub risks: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl RiskHistogram {
    pub fn from_risks(risks: Vec<f64>) -> Self {
        let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
        let max = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = risks.iter().sum::<f64>() / risks.len() as f64;
        RiskHistogram { risks, min, max, mean }
    }
}

/// Risk of `u` on validation set `set` (stream [`Stream::Validation`]).
pub fn validation_set_risk(
    eval: &RiskEvaluator,
    occupancy: &OccupancyModel,
    horizon: usize,
    seed: u64,
    set: u64,
    set_size: usize,
) -> Result<f64> {
    if set_size == 0 {
        return Err(Error::validation("set_size", "must be at least 1"));
    }
    occupancy.validate()?;
    let mut violations = 0usize;
    for i in 0..set_size {
        let s = scenario_at(seed, Stream::Validation(set), i, horizon, occupancy);
        violations += usize::from(eval.violates(&s.flux)?);
    }
    Ok(violations as f64 / set_size as f64)
}

/// Empirical risk of `u` over `sets` independent validation sets.
#[allow(clippy::too_many_arguments)]
pub fn risk_histogram(
    u: &DVector<f64>,
    lifted: &LiftedDynamics,
    comfort: &ComfortSpec,
    occupancy: &OccupancyModel,
    sets: usize,
    set_size: usize,
    seed: u64,
) -> Result<RiskHistogram> {
    if sets == 0 {
        return Err(Error::validation("sets", "must be at least 1"));
    }
    let eval = RiskEvaluator::new(u, lifted, comfort)?;
    let risks = (0..sets as u64)
        .map(|set| validation_set_risk(&eval, occupancy, lifted.horizon, seed, set, set_size))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskHistogram::from_risks(risks))
}

/// Builds the scenario program: input boxes first, then one comfort row per
/// (scenario, step, zone).
pub fn assemble_scenario_program<S: FluxProfile>(
    lifted: &LiftedDynamics,
    scenarios: &[S],
    comfort: &ComfortSpec,
    limits: &InputLimits,
    objective: &Objective,
) -> Result<ScenarioProgram> {
    comfort.validate()?;
    let nu = lifted.n_inputs;
    let m = lifted.horizon;
    let d = lifted.decision_dim();
    Error::check_dim("input lower limits", nu, limits.lower.len())?;
    Error::check_dim("input upper limits", nu, limits.upper.len())?;
    if limits.lower.iter().zip(&limits.upper).any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::validation("input limits", "lower limit above upper limit"));
    }
    Error::check_dim("input weight", nu, objective.input_weight.nrows())?;
    Error::check_dim("input weight", nu, objective.input_weight.ncols())?;

    let rows_c = ComfortRows::new(lifted, comfort);
    let nc = rows_c.len();
    let mut templates = DMatrix::zeros(2 * d + nc, d);
    let mut rows = Vec::with_capacity(2 * d + scenarios.len() * nc);
    for step in 0..m {
        for input in 0..nu {
            let col = step * nu + input;
            let t = 2 * col;
            templates[(t, col)] = -1.0;
            templates[(t + 1, col)] = 1.0;
            rows.push(ConstraintRow {
                template: t,
                rhs: -limits.lower[input],
                tag: RowTag::InputBound {
                    step,
                    input,
                    upper: false,
                },
            });
            rows.push(ConstraintRow {
                template: t + 1,
                rhs: limits.upper[input],
                tag: RowTag::InputBound {
                    step,
                    input,
                    upper: true,
                },
            });
        }
    }
    for r in 0..nc {
        templates.set_row(2 * d + r, &(rows_c.g.row(r) * rows_c.sign));
    }
    let nz = lifted.n_zones();
    for (scenario, s) in scenarios.iter().enumerate() {
        let hd = rows_c.disturbance_response(s.flux())?;
        for r in 0..nc {
            rows.push(ConstraintRow {
                template: 2 * d + r,
                rhs: rows_c.sign * (rows_c.bound - rows_c.base[r] - hd[r]),
                tag: RowTag::Comfort {
                    scenario,
                    zone: r % nz,
                    step: r / nz,
                },
            });
        }
    }

    let mut cost = block_diagonal(&objective.input_weight, m);
    let mut linear = DVector::zeros(d);
    let mut constant = 0.0;
    if let Some(q) = &objective.state_weight {
        Error::check_dim("state weight", lifted.state_dim, q.nrows())?;
        Error::check_dim("state weight", lifted.state_dim, q.ncols())?;
        if scenarios.is_empty() {
            return Err(Error::validation(
                "objective.state_weight",
                "a state penalty needs at least one scenario for its expectation",
            ));
        }
        // Sample average of (c + G U + H δᵢ)ᵀ Q̄ (c + G U + H δᵢ).
        let q_bar = block_diagonal(q, m);
        let free = lifted.free_response();
        let g_q = lifted.g.transpose() * &q_bar;
        cost += &g_q * &lifted.g;
        let mean = DVector::from_vec(mean_flux(scenarios)?);
        linear = &g_q * (&free + &lifted.h * mean) * 2.0;
        for s in scenarios {
            let x = &free + &lifted.h * DVector::from_column_slice(s.flux());
            constant += (x.transpose() * &q_bar * &x)[(0, 0)];
        }
        constant /= scenarios.len() as f64;
    }
    ScenarioProgram::new(cost, linear, constant, templates, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Deterministic,
    Standard,
    Incremental,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Deterministic, Method::Standard, Method::Incremental];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Deterministic => "deterministic",
            Method::Standard => "standard",
            Method::Incremental => "incremental",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One pass of the incremental loop.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub j: usize,
    pub n_j: u64,
    /// Scenarios in the program at this iteration.
    pub scenarios: usize,
    /// Support scenarios found by removal (`S*_j`).
    pub support: usize,
    /// Comfort rows with a nonzero multiplier.
    pub active_rows: usize,
    pub cost: f64,
}

/// An optimal decision and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub method: Method,
    pub u: DVector<f64>,
    pub cost: f64,
    pub scenarios_used: usize,
    pub theoretical_epsilon: Option<f64>,
    pub support_count: Option<usize>,
    pub active_rows: usize,
    pub trace: Vec<IterationRecord>,
    pub kkt: KktResiduals,
    /// Flux the deterministic method planned against.
    pub nominal_flux: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub method: Method,
    pub scenarios_used: usize,
    pub trace: Vec<IterationRecord>,
    pub cost: f64,
    pub theoretical_epsilon: Option<f64>,
    pub empirical_risk: f64,
    pub violations: usize,
    pub validation_size: usize,
    pub support_count: Option<usize>,
    pub rng_seed: u64,
    pub decision: Vec<f64>,
}

/// A fully specified experiment: model, comfort requirement, risk
/// parameters and random streams.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub lifted: LiftedDynamics,
    pub comfort: ComfortSpec,
    pub limits: InputLimits,
    pub objective: Objective,
    pub occupancy: OccupancyModel,
    pub beta: f64,
    pub mode: SizingMode,
    /// Samples averaged into the deterministic forecast.
    pub deterministic_samples: usize,
    pub validation_size: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

fn scenario_group(_: usize, tag: &RowTag) -> Option<usize> {
    match *tag {
        RowTag::Comfort { scenario, .. } => Some(scenario),
        _ => None,
    }
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.comfort.validate()?;
        self.occupancy.validate()?;
        Error::check_dim("occupancy zones", self.lifted.n_disturbances, self.occupancy.n_zones())?;
        self.risk_params()?;
        if self.deterministic_samples == 0 {
            return Err(Error::validation("deterministic_samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn risk_params(&self) -> Result<RiskParams> {
        RiskParams::new(self.comfort.epsilon, self.beta, self.lifted.decision_dim())
    }

    fn training(&self, range: core::ops::Range<usize>) -> Result<Vec<OccupancyScenario>> {
        sample_occupancy(self.seed, Stream::Training, range, self.lifted.horizon, &self.occupancy)
    }

    fn solve_program<S: FluxProfile>(&self, scenarios: &[S]) -> Result<(ScenarioProgram, SolveResult)> {
        let program = assemble_scenario_program(&self.lifted, scenarios, &self.comfort, &self.limits, &self.objective)?;
        let result = solve_qp(&program, &self.solver)?;
        if result.status != SolveStatus::Optimal {
            return Err(Error::Infeasible);
        }
        Ok((program, result))
    }

    fn comfort_active_rows(program: &ScenarioProgram, result: &SolveResult) -> Result<usize> {
        Ok(
            active_constraints(result, Some(self::SolverOptions::default().dual_tol))?
                .into_iter()
                .filter(|&i| matches!(program.rows()[i].tag, RowTag::Comfort { .. }))
                .count(),
        )
    }

    /// Number of scenarios whose removal changes the optimum.
    fn support_scenarios(&self, program: &ScenarioProgram, result: &SolveResult) -> Result<usize> {
        Ok(count_support_groups(program, result, &self.solver, scenario_group)?.count)
    }

    /// Plans against the empirical mean of `deterministic_samples` draws.
    pub fn solve_deterministic(&self) -> Result<Solution> {
        self.validate()?;
        let samples = sample_occupancy(
            self.seed,
            Stream::Nominal,
            0..self.deterministic_samples,
            self.lifted.horizon,
            &self.occupancy,
        )?;
        let nominal = mean_flux(&samples)?;
        let (program, result) = self.solve_program(core::slice::from_ref(&nominal))?;
        Ok(Solution {
            method: Method::Deterministic,
            active_rows: Self::comfort_active_rows(&program, &result)?,
            u: result.u,
            cost: result.cost,
            scenarios_used: 1,
            theoretical_epsilon: None,
            support_count: None,
            trace: Vec::new(),
            kkt: result.kkt,
            nominal_flux: Some(nominal),
        })
    }

    /// One solve with the standard sample size.
    pub fn solve_standard(&self) -> Result<Solution> {
        self.validate()?;
        let params = self.risk_params()?;
        let n = standard_sample_size(&params, self.mode) as usize;
        let scenarios = self.training(0..n)?;
        let (program, result) = self.solve_program(&scenarios)?;
        let support = self.support_scenarios(&program, &result)?;
        Ok(Solution {
            method: Method::Standard,
            active_rows: Self::comfort_active_rows(&program, &result)?,
            u: result.u,
            cost: result.cost,
            scenarios_used: n,
            theoretical_epsilon: Some(self.comfort.epsilon),
            support_count: Some(support),
            trace: Vec::new(),
            kkt: result.kkt,
            nominal_flux: None,
        })
    }

    /// Adds scenarios per the incremental schedule until the number of
    /// support scenarios `S*_j` does not exceed `j`.
    pub fn solve_incremental(&self) -> Result<Solution> {
        self.validate()?;
        let params = self.risk_params()?;
        let mut scenarios: Vec<OccupancyScenario> = Vec::new();
        let mut trace = Vec::new();
        for j in 0..=params.dims() {
            let entry = incremental_entry(&params, j, self.mode)?;
            let target = (entry.n_j as usize).max(scenarios.len());
            let fresh = self.training(scenarios.len()..target)?;
            scenarios.extend(fresh);

            let (program, result) = self.solve_program(&scenarios)?;
            let support = self.support_scenarios(&program, &result)?;
            let active_rows = Self::comfort_active_rows(&program, &result)?;
            log::debug!(
                "incremental j={j} N_j={} scenarios={} S*={support} cost={}",
                entry.n_j,
                scenarios.len(),
                result.cost
            );
            trace.push(IterationRecord {
                j,
                n_j: entry.n_j,
                scenarios: scenarios.len(),
                support,
                active_rows,
                cost: result.cost,
            });
            if support <= j {
                return Ok(Solution {
                    method: Method::Incremental,
                    u: result.u,
                    cost: result.cost,
                    scenarios_used: scenarios.len(),
                    theoretical_epsilon: Some(self.comfort.epsilon),
                    support_count: Some(support),
                    active_rows,
                    trace,
                    kkt: result.kkt,
                    nominal_flux: None,
                });
            }
        }
        // S*_d <= d for any non-degenerate convex program with d variables.
        Err(Error::Convergence {
            iterations: params.dims() + 1,
            best: Vec::new(),
        })
    }

    pub fn solve(&self, method: Method) -> Result<Solution> {
        match method {
            Method::Deterministic => self.solve_deterministic(),
            Method::Standard => self.solve_standard(),
            Method::Incremental => self.solve_incremental(),
        }
    }

    pub fn evaluator(&self, u: &DVector<f64>) -> Result<RiskEvaluator> {
        RiskEvaluator::new(u, &self.lifted, &self.comfort)
    }

    /// Validation set `set` of this experiment.
    pub fn validation_scenarios(&self, set: u64) -> Result<Vec<OccupancyScenario>> {
        sample_occupancy(
            self.seed,
            Stream::Validation(set),
            0..self.validation_size,
            self.lifted.horizon,
            &self.occupancy,
        )
    }

    pub fn report(&self, solution: &Solution, violations: usize) -> ExperimentReport {
        ExperimentReport {
            method: solution.method,
            scenarios_used: solution.scenarios_used,
            trace: solution.trace.clone(),
            cost: solution.cost,
            theoretical_epsilon: solution.theoretical_epsilon,
            empirical_risk: violations as f64 / self.validation_size as f64,
            violations,
            validation_size: self.validation_size,
            support_count: solution.support_count,
            rng_seed: self.seed,
            decision: solution.u.iter().copied().collect(),
        }
    }

    /// Solves with `method` and validates on the first validation set.
    pub fn run(&self, method: Method) -> Result<ExperimentReport> {
        let solution = self.solve(method)?;
        let validation = self.validation_scenarios(0)?;
        if validation.is_empty() {
            return Err(Error::validation("validation.set_size", "must be at least 1"));
        }
        let violations = self.evaluator(&solution.u)?.count_violations(&validation)?;
        Ok(self.report(&solution, violations))
    }

    pub fn run_deterministic(&self) -> Result<ExperimentReport> {
        self.run(Method::Deterministic)
    }

    pub fn run_standard(&self) -> Result<ExperimentReport> {
        self.run(Method::Standard)
    }

    pub fn run_incremental(&self) -> Result<ExperimentReport> {
        self.run(Method::Incremental)
    }
}
