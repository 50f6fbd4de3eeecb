//! Report JSON, summary CSV and plot-data CSVs.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use scenplan_core::{ExperimentReport, LiftedDynamics, Method, RiskHistogram, SizingMode, Solution};

/// Everything written to `report_<method>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub report: ExperimentReport,
    pub beta: f64,
    pub sizing_mode: SizingMode,
    pub horizon_steps: usize,
    /// Comfort rows with a nonzero multiplier at the returned optimum.
    pub active_rows: usize,
    pub kkt_residual: f64,
}

impl ReportFile {
    pub fn new(report: ExperimentReport, solution: &Solution, beta: f64, mode: SizingMode, horizon: usize) -> Self {
        ReportFile {
            report,
            beta,
            sizing_mode: mode,
            horizon_steps: horizon,
            active_rows: solution.active_rows,
            kkt_residual: solution.kkt.max(),
        }
    }
}

pub const SUMMARY_HEADER: &str =
    "method,scenarios_used,cost,theoretical_epsilon,empirical_risk,violations,validation_size,support_count,rng_seed";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One summary row; every number also appears in the JSON report.
pub fn summary_row(r: &ExperimentReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.method,
        r.scenarios_used,
        r.cost,
        opt(r.theoretical_epsilon),
        r.empirical_risk,
        r.violations,
        r.validation_size,
        opt(r.support_count),
        r.rng_seed
    )
}

fn zone_header(lifted: &LiftedDynamics, first: &str) -> String {
    let mut s = String::from(first);
    for z in &lifted.zone_names {
        s.push(',');
        s.push_str(z);
    }
    s.push('\n');
    s
}

fn push_states(out: &mut String, prefix: &str, lifted: &LiftedDynamics, states: &DVector<f64>) {
    let n = lifted.state_dim;
    let write_step = |out: &mut String, k: usize, x: &dyn Fn(usize) -> f64| {
        write!(out, "{prefix}{k},{}", k as f64 * lifted.step_minutes).unwrap();
        for &i in &lifted.zone_state_indices {
            write!(out, ",{}", x(i)).unwrap();
        }
        out.push('\n');
    };
    write_step(out, 0, &|i| lifted.x0[i]);
    for k in 0..lifted.horizon {
        write_step(out, k + 1, &|i| states[k * n + i]);
    }
}

/// Zone temperatures of `u` under one occupancy flux, from the initial
/// state through step `M`.
pub fn nominal_csv(lifted: &LiftedDynamics, u: &DVector<f64>, flux: &[f64]) -> String {
    let mut out = zone_header(lifted, "step,time_min");
    let states = lifted.free_response() + &lifted.g * u + &lifted.h * DVector::from_column_slice(flux);
    push_states(&mut out, "", lifted, &states);
    out
}

/// Zone temperatures of `u` under every scenario, long format.
pub fn trajectories_csv<'a>(
    lifted: &LiftedDynamics,
    u: &DVector<f64>,
    fluxes: impl Iterator<Item = &'a [f64]>,
) -> String {
    let mut out = zone_header(lifted, "scenario,step,time_min");
    let controlled = lifted.free_response() + &lifted.g * u;
    for (s, flux) in fluxes.enumerate() {
        let states = &controlled + &lifted.h * DVector::from_column_slice(flux);
        push_states(&mut out, &format!("{s},"), lifted, &states);
    }
    out
}

pub fn histogram_csv(h: &RiskHistogram, set_size: usize) -> String {
    let mut out = String::from("set,violations,set_size,risk\n");
    for (i, r) in h.risks.iter().enumerate() {
        let v = (r * set_size as f64).round() as usize;
        writeln!(out, "{i},{v},{set_size},{r}").unwrap();
    }
    out
}

pub fn histogram_summary_csv(h: &RiskHistogram, set_size: usize) -> String {
    format!(
        "sets,set_size,min,max,mean\n{},{set_size},{},{},{}\n",
        h.risks.len(),
        h.min,
        h.max,
        h.mean
    )
}

pub fn method_file(stem: &str, method: Method, ext: &str) -> String {
    format!("{stem}_{method}.{ext}")
}
