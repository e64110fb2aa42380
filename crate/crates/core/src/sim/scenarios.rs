use nalgebra::{DMatrix, DVector};

use super::config::{Candidate, ConstraintSpec, ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::lin_models::{
    close_loop, dc_feedforward_gain, place_poles, steady_state_kalman_gain, ControllerGains, NoiseModel,
    StateSpaceModel,
};

pub const SCENARIOS: [&str; 3] = ["uncontrolled-polytope", "uncontrolled-ball", "feedback-ball"];

const UNCONTROLLED_DELTA: [f64; 5] = [0.0, 0.2, 0.4, 1.0, 1.1];
const UNCONTROLLED_DELTA_B: [f64; 5] = [0.0, 0.1660, 0.3319, 0.8297, 0.9127];
const FEEDBACK_DELTA: [f64; 5] = [2.0, 2.01, 2.02, 2.03, 2.04];
const FEEDBACK_DELTA_B: [f64; 5] = [1.6594, 1.6677, 1.6760, 1.6843, 1.6926];

/// Plant state variance at the start of the feedback experiment; the
/// controller's own estimate starts known.
const FEEDBACK_PLANT_VAR: f64 = 1e-2;

/// Two-state, two-input, two-output candidate family; `delta` shifts the
/// first diagonal entry of `A` and `delta_b` the second input gain.
pub fn candidate_model(delta: f64, delta_b: f64) -> StateSpaceModel {
    let a = DMatrix::from_row_slice(2, 2, &[-0.0792 + delta, -0.6746, 1.0936, 0.0926]);
    let b = DMatrix::from_row_slice(2, 2, &[0.2734, 1.57 - delta_b, 0.3677, 0.0]);
    let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.1, 0.5]);
    StateSpaceModel::new(a, b, c).expect("fixed model dimensions")
}

fn uncontrolled(name: &str, constraint: ConstraintSpec) -> Result<ExperimentConfig> {
    let noise = NoiseModel::uncorrelated(DMatrix::identity(2, 2) * 0.2, DMatrix::identity(2, 2) * 80.0)?;
    let candidates = UNCONTROLLED_DELTA
        .iter()
        .zip(UNCONTROLLED_DELTA_B)
        .map(|(d, db)| Candidate { model: candidate_model(*d, db), noise: noise.clone() })
        .collect();
    Ok(ExperimentConfig {
        name: name.to_string(),
        candidates,
        true_model: None,
        constraint,
        horizon: 5,
        decision_threshold: 0.98,
        max_steps: 400,
        x0_mean: DVector::from_vec(vec![0.0, 1.0]),
        x0_cov: DMatrix::identity(2, 2) * 0.5,
        initial_probs: vec![0.2; 5],
        method: Method::Bc,
        ol_horizon: 200,
        ol_starts: 20,
        random_starts: 3,
        vertex_cap: crate::input_design::DEFAULT_VERTEX_CAP,
        seed: 0,
    })
}

/// Controller for the nominal (first) open-loop model: steady-state Kalman
/// observer, pole placement at 0.94 and 0.95, and DC-inverting feedforward.
pub fn feedback_controller(nominal: &StateSpaceModel, noise: &NoiseModel) -> Result<ControllerGains> {
    let observer = steady_state_kalman_gain(nominal, noise)?;
    let feedback = place_poles(nominal.a(), nominal.b(), &[0.94, 0.95])?;
    let feedforward = dc_feedforward_gain(nominal, &feedback)?;
    Ok(ControllerGains { feedback, feedforward, observer })
}

fn feedback_ball() -> Result<ExperimentConfig> {
    let open_noise = NoiseModel::uncorrelated(DMatrix::identity(2, 2) * 1e-4, DMatrix::identity(2, 2) * 1e-2)?;
    let open: Vec<StateSpaceModel> =
        FEEDBACK_DELTA.iter().zip(FEEDBACK_DELTA_B).map(|(d, db)| candidate_model(*d, db)).collect();
    let gains = feedback_controller(&open[0], &open_noise)?;
    let candidates = open
        .iter()
        .map(|m| {
            let (model, noise) = close_loop(m, &open_noise, &open[0], &gains)?;
            Ok(Candidate { model, noise })
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = DVector::from_vec(vec![3.0, 5.0]);
    // The loop starts settled at the reference under the nominal model.
    let nominal = &candidates[0].model;
    let x0_mean = (DMatrix::<f64>::identity(4, 4) - nominal.a())
        .try_inverse()
        .ok_or(Error::SingularDcGain)?
        * nominal.b()
        * &reference;
    let mut x0_cov = DMatrix::zeros(4, 4);
    x0_cov.view_mut((0, 0), (2, 2)).fill_diagonal(FEEDBACK_PLANT_VAR);
    Ok(ExperimentConfig {
        name: "feedback-ball".into(),
        candidates,
        true_model: Some(3),
        constraint: ConstraintSpec::EnergyBall { energy_bound: 2.5e-3, center: reference },
        horizon: 5,
        decision_threshold: 0.98,
        max_steps: 400,
        x0_mean,
        x0_cov,
        initial_probs: vec![0.2; 5],
        method: Method::Bc,
        ol_horizon: 200,
        ol_starts: 20,
        random_starts: 3,
        vertex_cap: crate::input_design::DEFAULT_VERTEX_CAP,
        seed: 0,
    })
}

/// Built-in experiment configurations.
pub fn build_scenario(name: &str) -> Result<ExperimentConfig> {
    match name {
        "uncontrolled-polytope" => uncontrolled(
            name,
            ConstraintSpec::BoxRate { amp_bound: 2.0, rate_bound: 1.0, u_prev: DVector::zeros(2) },
        ),
        "uncontrolled-ball" => {
            uncontrolled(name, ConstraintSpec::EnergyBall { energy_bound: 2.0, center: DVector::zeros(2) })
        }
        "feedback-ball" => feedback_ball(),
        other => Err(Error::InvalidConfig(format!(
            "unknown scenario '{other}' (expected one of {})",
            SCENARIOS.join(", ")
        ))),
    }
}
