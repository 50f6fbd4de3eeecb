//! Experiment and building config files.
//!
//! Both are JSON and reject unknown fields. The experiment config points at
//! a building file; relative paths are resolved against the directory of
//! the experiment config.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use scenplan_core::{
    build_stylized_building, lift_dynamics, BuildingParams, ComfortLimit, ComfortSpec, Correlation, Experiment,
    InputLimits, Objective, OccupancyModel, SizingMode, SolverOptions,
};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Summer,
    Winter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComfortConfig {
    pub season: Season,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min_c: Option<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    pub beta: f64,
    #[serde(default)]
    pub mode: SizingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupancyConfig {
    pub lambda: f64,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default = "default_watts_per_person")]
    pub watts_per_person: f64,
}

fn default_watts_per_person() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub sets: usize,
    pub set_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub air_c: f64,
    pub wall_c: f64,
}

impl Default for InitialStateConfig {
    fn default() -> Self {
        InitialStateConfig {
            air_c: 23.0,
            wall_c: 25.0,
        }
    }
}

/// Diagonal per-step weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// One weight per model state; omitted means `Q = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_weight: Option<Vec<f64>>,
    /// One weight per input.
    pub input_weight: Vec<f64>,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            state_weight: None,
            input_weight: vec![1.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub building: PathBuf,
    pub horizon_steps: usize,
    pub comfort: ComfortConfig,
    pub risk: RiskConfig,
    pub occupancy: OccupancyConfig,
    pub validation: ValidationConfig,
    pub seed: u64,
    #[serde(default)]
    pub initial_state: InitialStateConfig,
    #[serde(default = "default_deterministic_samples")]
    pub deterministic_samples: usize,
    #[serde(default)]
    pub objective: ObjectiveConfig,
}

fn default_deterministic_samples() -> usize {
    1000
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::config(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::config(path, e))
}

pub fn load_building(path: &Path) -> Result<BuildingParams> {
    let params: BuildingParams = read_json(path)?;
    params.validate().map_err(|e| AppError::config(path, e))?;
    Ok(params)
}

/// An experiment config together with its resolved building.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: ExperimentConfig,
    pub building: BuildingParams,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: ExperimentConfig = read_json(path)?;
        let building_path = match path.parent() {
            Some(dir) if config.building.is_relative() => dir.join(&config.building),
            _ => config.building.clone(),
        };
        let building = load_building(&building_path)?;
        let loaded = LoadedConfig {
            path: path.to_path_buf(),
            config,
            building,
        };
        loaded.check()?;
        Ok(loaded)
    }

    fn check(&self) -> Result<()> {
        let c = &self.config;
        let bad = |reason: &str| Err(AppError::config(&self.path, reason));
        if c.horizon_steps == 0 {
            return bad("horizon_steps must be at least 1");
        }
        if c.validation.sets == 0 || c.validation.set_size == 0 {
            return bad("validation.sets and validation.set_size must be at least 1");
        }
        match c.comfort.season {
            Season::Summer if c.comfort.t_max_c.is_none() => return bad("summer comfort needs t_max_c"),
            Season::Winter if c.comfort.t_min_c.is_none() => return bad("winter comfort needs t_min_c"),
            _ => {}
        }
        Ok(())
    }

    pub fn comfort(&self) -> ComfortSpec {
        let c = &self.config.comfort;
        let limit = match c.season {
            Season::Summer => ComfortLimit::Summer {
                t_max_c: c.t_max_c.unwrap_or(f64::NAN),
            },
            Season::Winter => ComfortLimit::Winter {
                t_min_c: c.t_min_c.unwrap_or(f64::NAN),
            },
        };
        ComfortSpec {
            limit,
            epsilon: c.epsilon,
        }
    }

    fn objective(&self, state_dim: usize) -> Result<Objective> {
        let o = &self.config.objective;
        let diag = |what: &str, w: &[f64], n: usize| {
            if w.len() != n {
                return Err(AppError::config(
                    &self.path,
                    format!("objective.{what} needs {n} entries, got {}", w.len()),
                ));
            }
            Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(w)))
        };
        Ok(Objective {
            state_weight: o
                .state_weight
                .as_deref()
                .map(|w| diag("state_weight", w, state_dim))
                .transpose()?,
            input_weight: diag("input_weight", &o.input_weight, scenplan_core::model::N_INPUTS)?,
        })
    }

    /// Builds the experiment; `seed` overrides the config seed.
    pub fn experiment(&self, seed: Option<u64>) -> Result<Experiment> {
        let c = &self.config;
        let ctx = |e| AppError::from_core(format!("building experiment from {}", self.path.display()), e);
        let model = build_stylized_building(&self.building).map_err(ctx)?;
        let x0 = model.initial_state(c.initial_state.air_c, c.initial_state.wall_c);
        let lifted = lift_dynamics(&model, c.horizon_steps, &x0).map_err(ctx)?;
        let occupancy = OccupancyModel::poisson(
            c.occupancy.lambda,
            c.occupancy.correlation,
            c.occupancy.watts_per_person,
            model.floor_areas_m2.clone(),
        );
        let experiment = Experiment {
            objective: self.objective(model.state_dim())?,
            lifted,
            comfort: self.comfort(),
            limits: InputLimits::default(),
            occupancy,
            beta: c.risk.beta,
            mode: c.risk.mode,
            deterministic_samples: c.deterministic_samples,
            validation_size: c.validation.set_size,
            seed: seed.unwrap_or(c.seed),
            solver: SolverOptions::default(),
        };
        experiment.validate().map_err(|e| AppError::config(&self.path, e))?;
        Ok(experiment)
    }
}
