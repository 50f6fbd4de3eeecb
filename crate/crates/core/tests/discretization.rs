mod oracles;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use scenplan_core::model::{RcNetwork, N_INPUTS};
use scenplan_core::{build_stylized_building, lift_dynamics, BuildingParams};

fn augmented(params: &BuildingParams) -> (DMatrix<f64>, usize) {
    let net = RcNetwork::from_params(params).unwrap();
    let n = net.capacitance.len();
    let nz = params.zones.len();
    let cols = N_INPUTS + nz + 1;
    let mut aug = DMatrix::zeros(n + cols, n + cols);
    for i in 0..n {
        let c = net.capacitance[i];
        for j in 0..n {
            aug[(i, j)] = -net.conductance[(i, j)] / c;
        }
        for j in 0..N_INPUTS {
            aug[(i, n + j)] = net.input_gain[(i, j)] / c;
        }
        for j in 0..nz {
            aug[(i, n + N_INPUTS + j)] = net.disturbance_gain[(i, j)] / c;
        }
        aug[(i, n + cols - 1)] = net.constant_gain[i] / c;
    }
    (aug * params.step_seconds(), n)
}

#[test]
fn discretization_matches_fine_euler() {
    let params = BuildingParams::stylized_default();
    let model = build_stylized_building(&params).unwrap();
    let (aug, n) = augmented(&params);
    let phi = oracles::euler_expm(&aug);
    let scale = phi.amax();
    let err = |a: &DMatrix<f64>, r: usize, c: usize| (a - phi.view((r, c), (a.nrows(), a.ncols()))).amax();
    assert!(err(&model.a, 0, 0) < 1e-8 * scale.max(1.0));
    assert!(err(&model.b_u, 0, n) < 1e-8 * model.b_u.amax());
    assert!(err(&model.b_delta, 0, n + N_INPUTS) < 1e-8 * model.b_delta.amax());
    let e = DMatrix::from_column_slice(n, 1, model.exogenous.as_slice());
    assert!(err(&e, 0, n + N_INPUTS + 3) < 1e-8 * model.exogenous.amax());
}

// From the Euler oracle above, frozen.
const GOLDEN_A00: f64 = 0.7824095751880589;
const GOLDEN_A03: f64 = 0.14859606007660847;
const GOLDEN_A22: f64 = 0.8125673315563626;
const GOLDEN_A26: f64 = 0.027497104350340622;
const GOLDEN_A30: f64 = 0.023775369612257354;
const GOLDEN_BU01: f64 = 0.026594423261984634;
const GOLDEN_BU20: f64 = -0.8125273582596251;
const GOLDEN_BD22: f64 = 0.027079077360350444;
const GOLDEN_RHO: f64 = 0.9945929223835572;

#[test]
fn default_model_golden_entries() {
    let model = build_stylized_building(&BuildingParams::stylized_default()).unwrap();
    let golden_a = [
        ((0, 0), GOLDEN_A00),
        ((0, 3), GOLDEN_A03),
        ((2, 2), GOLDEN_A22),
        ((2, 6), GOLDEN_A26),
        ((3, 0), GOLDEN_A30),
    ];
    for ((r, c), v) in golden_a {
        assert_relative_eq!(model.a[(r, c)], v, max_relative = 1e-8);
    }
    assert_relative_eq!(model.b_u[(0, 1)], GOLDEN_BU01, max_relative = 1e-8);
    assert_relative_eq!(model.b_u[(2, 0)], GOLDEN_BU20, max_relative = 1e-8);
    assert_relative_eq!(model.b_delta[(2, 2)], GOLDEN_BD22, max_relative = 1e-8);
    assert_relative_eq!(model.spectral_radius, GOLDEN_RHO, max_relative = 1e-9);
}

#[test]
fn ambient_is_a_fixed_point_without_sun() {
    let mut params = BuildingParams::stylized_default();
    params.solar_flux_w_m2 = 0.0;
    let model = build_stylized_building(&params).unwrap();
    let x = model.uniform_state(35.0);
    let next = model.step(&x, &DVector::zeros(3), &DVector::zeros(3)).unwrap();
    assert!((next - x).amax() < 1e-10);
}

#[test]
fn bedroom_swap_commutes_with_dynamics() {
    let model = build_stylized_building(&BuildingParams::stylized_default()).unwrap();
    let perm = [1, 0, 2, 4, 3, 5, 7, 6];
    let p = DMatrix::from_fn(8, 8, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
    assert!((&p * &model.a - &model.a * &p).amax() < 1e-14);
    assert!((&p * &model.b_u - &model.b_u).amax() < 1e-14 * model.b_u.amax());
    assert!((&p * &model.exogenous - &model.exogenous).amax() < 1e-12);
}

#[test]
fn default_model_is_stable() {
    let model = build_stylized_building(&BuildingParams::stylized_default()).unwrap();
    assert!(model.spectral_radius < 1.0);
    let mut x = model.uniform_state(0.0);
    x[0] = 1.0;
    let (u, d) = (DVector::zeros(3), DVector::zeros(3));
    for _ in 0..20_000 {
        x = model.step_dynamics(&x, &u, &d).unwrap();
    }
    assert!(x.amax() < 1e-6);
}

fn lift_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=16).prop_flat_map(|m| {
        (
            Just(m),
            prop::collection::vec(15.0..35.0f64, 8),
            prop::collection::vec(0.0..1.0f64, 3 * m),
            prop::collection::vec(0.0..40.0f64, 3 * m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lifted_dynamics_equal_iterated_steps((m, x0, u, delta) in lift_case()) {
        let model = build_stylized_building(&BuildingParams::stylized_default()).unwrap();
        let x0 = DVector::from_vec(x0);
        let u: Vec<f64> = u.iter().enumerate().map(|(i, v)| if i % 3 == 0 { 0.9 * v } else { 1000.0 * v }).collect();
        let lifted = lift_dynamics(&model, m, &x0).unwrap();
        let traj = lifted
            .simulate_trajectory(&DVector::from_column_slice(&u), &DVector::from_column_slice(&delta))
            .unwrap();
        let mut x = x0;
        for k in 0..m {
            x = model
                .step(&x, &DVector::from_column_slice(&u[3 * k..3 * k + 3]), &DVector::from_column_slice(&delta[3 * k..3 * k + 3]))
                .unwrap();
            let lifted_x = traj.state_at(k);
            for i in 0..8 {
                prop_assert!((lifted_x[i] - x[i]).abs() <= 1e-10 * x[i].abs().max(1.0));
            }
        }
    }
}
