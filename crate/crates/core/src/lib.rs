//! Scenario-approach energy management for a multi-zone building.
//!
//! The crate is `no_std` with `alloc`: it contains the thermal model, the
//! sample-size arithmetic, the QP solver and the scenario engine, but no IO.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod linalg;

pub mod engine;
pub mod model;
pub mod occupancy;
pub mod qp;
pub mod sizing;

pub use error::{Error, Result};
pub use linalg::{expm, spectral_norm};

pub use engine::{
    assemble_scenario_program, empirical_risk, risk_histogram, ComfortLimit, ComfortSpec, Experiment, ExperimentReport,
    InputLimits, IterationRecord, Method, Objective, RiskEvaluator, RiskHistogram, Solution,
};
pub use model::{build_stylized_building, lift_dynamics, BuildingModel, BuildingParams, LiftedDynamics, Trajectory};
pub use occupancy::{sample_occupancy, Correlation, OccupancyModel, OccupancyScenario, OccupantDistribution, Stream};
pub use qp::{
    active_constraints, count_support_constraints, count_support_groups, solve_qp, ConstraintRow, RowTag,
    ScenarioProgram, SolveResult, SolveStatus, SolverOptions, SupportCount,
};
pub use sizing::{IncrementalSchedule, RiskParams, SizingMode};
