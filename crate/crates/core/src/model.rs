//! Multi-zone thermal RC network and its horizon-lifted prediction matrices.
//!
//! States are ordered zone air temperatures first (in configuration order),
//! followed by one temperature per wall layer. Inputs are building-wide:
//! blind position fraction, heating flux and cooling flux, both fluxes in W
//! per m² of zone floor area. The uncertain disturbance has one channel per
//! zone carrying the occupancy heat flux in W/m².
//!
//! Ambient temperature and solar radiation are constant and known; together
//! they form a fixed affine term that is kept out of `B_δ` so that `δ`
//! remains exactly the occupancy channel.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::expm;

/// Name used in wall definitions for the outdoor side.
pub const AMBIENT: &str = "ambient";

/// Number of scalar inputs: blind fraction, heating flux, cooling flux.
pub const N_INPUTS: usize = 3;

pub const INPUT_BLIND: usize = 0;
pub const INPUT_HEATING: usize = 1;
pub const INPUT_COOLING: usize = 2;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ZoneParams {
    pub name: String,
    pub floor_area_m2: f64,
    /// Lumped air and furnishing heat capacity, J/K.
    pub capacitance: f64,
    pub window_area_m2: f64,
}

/// A single-layer wall between two zones, or between a zone and ambient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct WallParams {
    pub name: String,
    pub side_a: String,
    /// A zone name or [`AMBIENT`].
    pub side_b: String,
    /// Heat capacity of the wall layer, J/K.
    pub capacitance: f64,
    /// Resistance from side a to the layer node, K/W.
    pub r_a: f64,
    /// Resistance from the layer node to side b, K/W.
    pub r_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ResistanceParams {
    /// Area-specific window resistance (1 / U-value), K·m²/W.
    pub window_k_m2_per_w: f64,
    pub walls: Vec<WallParams>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BuildingParams {
    pub zones: Vec<ZoneParams>,
    pub resistances: ResistanceParams,
    pub step_minutes: f64,
    pub ambient_temp_c: f64,
    pub solar_flux_w_m2: f64,
    /// Fraction of the solar flux on a window that becomes zone heat.
    pub solar_gain_factor: f64,
}

impl BuildingParams {
    /// The shipped three-zone building: two identical bedrooms (Z0001,
    /// Z0002) flanking a living room (Z0003).
    pub fn stylized_default() -> Self {
        let zone = |name: &str, area: f64, cap: f64, window: f64| ZoneParams {
            name: name.into(),
            floor_area_m2: area,
            capacitance: cap,
            window_area_m2: window,
        };
        let wall = |name: &str, a: &str, b: &str, cap: f64, r_a: f64, r_b: f64| WallParams {
            name: name.into(),
            side_a: a.into(),
            side_b: b.into(),
            capacitance: cap,
            r_a,
            r_b,
        };
        BuildingParams {
            zones: vec![
                zone("Z0001", 16.0, 4.8e5, 3.0),
                zone("Z0002", 16.0, 4.8e5, 3.0),
                zone("Z0003", 32.0, 9.6e5, 8.0),
            ],
            resistances: ResistanceParams {
                window_k_m2_per_w: 0.357,
                walls: vec![
                    wall("W0001_ext", "Z0001", AMBIENT, 3.0e6, 0.011, 0.067),
                    wall("W0002_ext", "Z0002", AMBIENT, 3.0e6, 0.011, 0.067),
                    wall("W0003_ext", "Z0003", AMBIENT, 4.5e6, 0.0074, 0.044),
                    wall("W0001_0003", "Z0001", "Z0003", 1.2e6, 0.03, 0.03),
                    wall("W0002_0003", "Z0002", "Z0003", 1.2e6, 0.03, 0.03),
                ],
            },
            step_minutes: 15.0,
            ambient_temp_c: 35.0,
            solar_flux_w_m2: 200.0,
            solar_gain_factor: 0.6,
        }
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_minutes * 60.0
    }

    fn zone_index(&self, name: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: String, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        }
        fn non_negative(field: String, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    field,
                    format!("must be non-negative and finite, got {v}"),
                ))
            }
        }

        if self.zones.is_empty() {
            return Err(Error::validation("zones", "at least one zone is required"));
        }
        for (i, z) in self.zones.iter().enumerate() {
            if z.name == AMBIENT || z.name.is_empty() {
                return Err(Error::validation(format!("zones[{i}].name"), "reserved or empty name"));
            }
            if self.zones[..i].iter().any(|o| o.name == z.name) {
                return Err(Error::validation(
                    format!("zones[{i}].name"),
                    format!("duplicate zone {}", z.name),
                ));
            }
            positive(format!("zones[{i}].floor_area_m2"), z.floor_area_m2)?;
            positive(format!("zones[{i}].capacitance"), z.capacitance)?;
            non_negative(format!("zones[{i}].window_area_m2"), z.window_area_m2)?;
        }
        positive(
            "resistances.window_k_m2_per_w".into(),
            self.resistances.window_k_m2_per_w,
        )?;
        for (i, w) in self.resistances.walls.iter().enumerate() {
            positive(format!("resistances.walls[{i}].capacitance"), w.capacitance)?;
            positive(format!("resistances.walls[{i}].r_a"), w.r_a)?;
            positive(format!("resistances.walls[{i}].r_b"), w.r_b)?;
            if self.zone_index(&w.side_a).is_none() {
                return Err(Error::validation(
                    format!("resistances.walls[{i}].side_a"),
                    format!("unknown zone {}", w.side_a),
                ));
            }
            if w.side_b != AMBIENT && self.zone_index(&w.side_b).is_none() {
                return Err(Error::validation(
                    format!("resistances.walls[{i}].side_b"),
                    format!("unknown zone {}", w.side_b),
                ));
            }
            if w.side_a == w.side_b {
                return Err(Error::validation(
                    format!("resistances.walls[{i}]"),
                    "wall connects a zone to itself",
                ));
            }
        }
        positive("step_minutes".into(), self.step_minutes)?;
        if !self.ambient_temp_c.is_finite() {
            return Err(Error::validation("ambient_temp_c", "must be finite"));
        }
        non_negative("solar_flux_w_m2".into(), self.solar_flux_w_m2)?;
        if !(0.0..=1.0).contains(&self.solar_gain_factor) {
            return Err(Error::validation("solar_gain_factor", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Continuous-time generator of an RC network: `C dT/dt = -K T + E w`.
///
/// `K` is the symmetric conductance (Laplacian plus ambient) matrix and
/// `capacitance` the diagonal of `C`.
#[derive(Debug, Clone)]
pub struct RcNetwork {
    pub capacitance: DVector<f64>,
    pub conductance: DMatrix<f64>,
    /// Heat flow (W) into each node per unit of each input.
    pub input_gain: DMatrix<f64>,
    /// Heat flow (W) into each node per unit W/m² of occupancy in each zone.
    pub disturbance_gain: DMatrix<f64>,
    /// Constant heat flow (W) from ambient temperature and unshaded solar gain.
    pub constant_gain: DVector<f64>,
}

impl RcNetwork {
    pub fn from_params(p: &BuildingParams) -> Result<Self> {
        p.validate()?;
        let nz = p.zones.len();
        let n = nz + p.resistances.walls.len();
        let mut cap = DVector::zeros(n);
        let mut k = DMatrix::zeros(n, n);
        let mut constant = DVector::zeros(n);
        let couple = |k: &mut DMatrix<f64>, i: usize, j: usize, r: f64| {
            let g = 1.0 / r;
            k[(i, i)] += g;
            k[(j, j)] += g;
            k[(i, j)] -= g;
            k[(j, i)] -= g;
        };

        for (i, z) in p.zones.iter().enumerate() {
            cap[i] = z.capacitance;
            if z.window_area_m2 > 0.0 {
                let g = z.window_area_m2 / p.resistances.window_k_m2_per_w;
                k[(i, i)] += g;
                constant[i] += g * p.ambient_temp_c;
            }
            constant[i] += p.solar_flux_w_m2 * z.window_area_m2 * p.solar_gain_factor;
        }
        for (w_idx, w) in p.resistances.walls.iter().enumerate() {
            let node = nz + w_idx;
            cap[node] = w.capacitance;
            let a = p.zone_index(&w.side_a).expect("validated");
            couple(&mut k, a, node, w.r_a);
            if w.side_b == AMBIENT {
                let g = 1.0 / w.r_b;
                k[(node, node)] += g;
                constant[node] += g * p.ambient_temp_c;
            } else {
                let b = p.zone_index(&w.side_b).expect("validated");
                couple(&mut k, node, b, w.r_b);
            }
        }

        let mut input_gain = DMatrix::zeros(n, N_INPUTS);
        let mut disturbance_gain = DMatrix::zeros(n, nz);
        for (i, z) in p.zones.iter().enumerate() {
            // Blinds remove a fraction of the (constant) solar gain.
            input_gain[(i, INPUT_BLIND)] = -p.solar_flux_w_m2 * z.window_area_m2 * p.solar_gain_factor;
            input_gain[(i, INPUT_HEATING)] = z.floor_area_m2;
            input_gain[(i, INPUT_COOLING)] = -z.floor_area_m2;
            disturbance_gain[(i, i)] = z.floor_area_m2;
        }

        Ok(RcNetwork {
            capacitance: cap,
            conductance: k,
            input_gain,
            disturbance_gain,
            constant_gain: constant,
        })
    }

    /// `A_c = -C⁻¹K`.
    pub fn state_generator(&self) -> DMatrix<f64> {
        let mut a = -self.conductance.clone();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row /= self.capacitance[i];
        }
        a
    }

    fn scale_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row /= self.capacitance[i];
        }
        out
    }

    /// Spectral radius of `exp(A_c h)`.
    ///
    /// `A_c` is similar to the symmetric `-C^{-1/2} K C^{-1/2}`, so its
    /// spectrum is real and obtained from a symmetric eigenproblem.
    pub fn discrete_spectral_radius(&self, step_seconds: f64) -> f64 {
        let n = self.capacitance.len();
        let mut sym = -self.conductance.clone();
        for i in 0..n {
            for j in 0..n {
                sym[(i, j)] /= libm::sqrt(self.capacitance[i] * self.capacitance[j]);
            }
        }
        let sym = (&sym + sym.transpose()) * 0.5;
        let lambda_max = sym
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        libm::exp(lambda_max * step_seconds)
    }
}

/// Discrete-time LTI building model `x⁺ = A x + B_u u + B_δ δ + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingModel {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_delta: DMatrix<f64>,
    /// Per-step contribution of the constant ambient and solar inputs.
    pub exogenous: DVector<f64>,
    pub zone_names: Vec<String>,
    pub zone_state_indices: Vec<usize>,
    pub floor_areas_m2: Vec<f64>,
    pub step_minutes: f64,
    pub ambient_temp_c: f64,
    pub solar_flux_w_m2: f64,
    pub spectral_radius: f64,
}

/// Discretizes the RC network of `params` exactly (zero-order hold) at the
/// configured step.
pub fn build_stylized_building(params: &BuildingParams) -> Result<BuildingModel> {
    let net = RcNetwork::from_params(params)?;
    let h = params.step_seconds();
    let spectral_radius = net.discrete_spectral_radius(h);
    // An undamped mode discretizes to exactly 1 up to eigensolver rounding.
    if !(spectral_radius < 1.0 - 1e-12) {
        return Err(Error::Unstable { spectral_radius });
    }

    let n = net.capacitance.len();
    let nz = params.zones.len();
    let ac = net.state_generator();
    let bu = net.scale_rows(&net.input_gain);
    let bd = net.scale_rows(&net.disturbance_gain);
    let e = net.scale_rows(&DMatrix::from_column_slice(n, 1, net.constant_gain.as_slice()));

    // exp([[A_c, B], [0, 0]] h) = [[A, ∫exp(A_c s) ds B], [0, I]]
    let m = N_INPUTS + nz + 1;
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&ac);
    aug.view_mut((0, n), (n, N_INPUTS)).copy_from(&bu);
    aug.view_mut((0, n + N_INPUTS), (n, nz)).copy_from(&bd);
    aug.view_mut((0, n + N_INPUTS + nz), (n, 1)).copy_from(&e);
    let phi = expm(&(aug * h));

    Ok(BuildingModel {
        a: phi.view((0, 0), (n, n)).into_owned(),
        b_u: phi.view((0, n), (n, N_INPUTS)).into_owned(),
        b_delta: phi.view((0, n + N_INPUTS), (n, nz)).into_owned(),
        exogenous: phi.column(n + N_INPUTS + nz).rows(0, n).into_owned(),
        zone_names: params.zones.iter().map(|z| z.name.clone()).collect(),
        zone_state_indices: (0..nz).collect(),
        floor_areas_m2: params.zones.iter().map(|z| z.floor_area_m2).collect(),
        step_minutes: params.step_minutes,
        ambient_temp_c: params.ambient_temp_c,
        solar_flux_w_m2: params.solar_flux_w_m2,
        spectral_radius,
    })
}

impl BuildingModel {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn n_disturbances(&self) -> usize {
        self.b_delta.ncols()
    }

    pub fn n_zones(&self) -> usize {
        self.zone_state_indices.len()
    }

    fn check_step_dims(&self, x: &DVector<f64>, u: &DVector<f64>, delta: &DVector<f64>) -> Result<()> {
        Error::check_dim("state", self.state_dim(), x.len())?;
        Error::check_dim("input", self.n_inputs(), u.len())?;
        Error::check_dim("disturbance", self.n_disturbances(), delta.len())
    }

    /// `A x + B_u u + B_δ δ`, without the constant ambient/solar term.
    pub fn step_dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, delta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_step_dims(x, u, delta)?;
        Ok(&self.a * x + &self.b_u * u + &self.b_delta * delta)
    }

    /// One step of the full affine model, including ambient and solar gains.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, delta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.step_dynamics(x, u, delta)? + &self.exogenous)
    }

    /// A state with every zone and wall node at `temp_c`.
    pub fn uniform_state(&self, temp_c: f64) -> DVector<f64> {
        DVector::from_element(self.state_dim(), temp_c)
    }

    /// A state with separate air and wall-layer temperatures.
    pub fn initial_state(&self, air_temp_c: f64, wall_temp_c: f64) -> DVector<f64> {
        let mut x = self.uniform_state(wall_temp_c);
        for &i in &self.zone_state_indices {
            x[i] = air_temp_c;
        }
        x
    }
}

/// `X = F x₀ + G U + H δ + c` over `horizon` steps, with `X = [x₁; …; x_M]`,
/// `U = [u₀; …; u_{M-1}]` and `δ = [δ₀; …; δ_{M-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedDynamics {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Accumulated constant ambient and solar contribution.
    pub offset: DVector<f64>,
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub step_minutes: f64,
    pub state_dim: usize,
    pub n_inputs: usize,
    pub n_disturbances: usize,
    pub zone_state_indices: Vec<usize>,
    pub zone_names: Vec<String>,
    pub floor_areas_m2: Vec<f64>,
}

pub fn lift_dynamics(model: &BuildingModel, horizon: usize, x0: &DVector<f64>) -> Result<LiftedDynamics> {
    if horizon < 1 {
        return Err(Error::validation("horizon", "must be at least 1 step"));
    }
    let n = model.state_dim();
    Error::check_dim("initial state", n, x0.len())?;
    let (nu, nd) = (model.n_inputs(), model.n_disturbances());

    // powers[k] = A^k
    let mut powers = Vec::with_capacity(horizon + 1);
    powers.push(DMatrix::identity(n, n));
    for k in 1..=horizon {
        powers.push(&model.a * &powers[k - 1]);
    }
    let ab_u: Vec<_> = powers.iter().map(|p| p * &model.b_u).collect();
    let ab_d: Vec<_> = powers.iter().map(|p| p * &model.b_delta).collect();

    let mut f = DMatrix::zeros(n * horizon, n);
    let mut g = DMatrix::zeros(n * horizon, nu * horizon);
    let mut h = DMatrix::zeros(n * horizon, nd * horizon);
    let mut offset = DVector::zeros(n * horizon);
    let mut acc = DVector::zeros(n);
    for row in 0..horizon {
        // Row block `row` holds x_{row+1}.
        f.view_mut((row * n, 0), (n, n)).copy_from(&powers[row + 1]);
        for col in 0..=row {
            let lag = row - col;
            g.view_mut((row * n, col * nu), (n, nu)).copy_from(&ab_u[lag]);
            h.view_mut((row * n, col * nd), (n, nd)).copy_from(&ab_d[lag]);
        }
        acc = &model.a * acc + &model.exogenous;
        offset.rows_mut(row * n, n).copy_from(&acc);
    }

    Ok(LiftedDynamics {
        f,
        g,
        h,
        offset,
        x0: x0.clone(),
        horizon,
        step_minutes: model.step_minutes,
        state_dim: n,
        n_inputs: nu,
        n_disturbances: nd,
        zone_state_indices: model.zone_state_indices.clone(),
        zone_names: model.zone_names.clone(),
        floor_areas_m2: model.floor_areas_m2.clone(),
    })
}

impl LiftedDynamics {
    /// Number of decision variables `n_inputs × horizon`.
    pub fn decision_dim(&self) -> usize {
        self.n_inputs * self.horizon
    }

    pub fn disturbance_dim(&self) -> usize {
        self.n_disturbances * self.horizon
    }

    pub fn n_zones(&self) -> usize {
        self.zone_state_indices.len()
    }

    /// Row of `X` holding the air temperature of `zone` at step `step + 1`.
    pub fn zone_row(&self, zone: usize, step: usize) -> usize {
        step * self.state_dim + self.zone_state_indices[zone]
    }

    /// `F x₀ + c`: the trajectory with zero input and zero occupancy.
    pub fn free_response(&self) -> DVector<f64> {
        &self.f * &self.x0 + &self.offset
    }

    pub fn simulate_trajectory(&self, u: &DVector<f64>, delta: &DVector<f64>) -> Result<Trajectory> {
        Error::check_dim("stacked input", self.decision_dim(), u.len())?;
        Error::check_dim("stacked disturbance", self.disturbance_dim(), delta.len())?;
        let states = self.free_response() + &self.g * u + &self.h * delta;
        Ok(Trajectory {
            states,
            state_dim: self.state_dim,
            zone_state_indices: self.zone_state_indices.clone(),
        })
    }
}

/// A stacked state trajectory `X` with accessors for per-zone series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: DVector<f64>,
    state_dim: usize,
    zone_state_indices: Vec<usize>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() / self.state_dim
    }

    /// State after `step + 1` steps.
    pub fn state_at(&self, step: usize) -> DVector<f64> {
        self.states.rows(step * self.state_dim, self.state_dim).into_owned()
    }

    /// Air temperature of `zone` at steps 1..=M.
    pub fn zone_series(&self, zone: usize) -> Vec<f64> {
        let idx = self.zone_state_indices[zone];
        (0..self.horizon())
            .map(|k| self.states[k * self.state_dim + idx])
            .collect()
    }
}
