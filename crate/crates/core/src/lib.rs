//! Closed-loop active fault diagnosis for stochastic linear systems.
//!
//! A bank of Kalman filters, one per candidate model, tracks model
//! probabilities online. At every step an input is designed over a receding
//! horizon to shrink an upper bound on the misdiagnosis probability built
//! from pairwise Bhattacharyya coefficients, and the first block of that
//! input is applied.

pub mod bayes;
pub mod bhattacharyya;
pub mod concavity;
pub mod error;
pub mod estimation;
pub mod input_design;
pub mod lin_models;
pub mod sim;
mod linalg;
mod matrix_serde;

pub use bayes::{decide, error_probability, gaussian_loglik, update_beliefs, BeliefState};
pub use bhattacharyya::{
    all_pairs, bhatt_coefficient, bhatt_distance, pair_quadratic, pair_quadratic_from_responses, taylor_form,
    taylor_value, weighted_bound, weighted_bound_grad, PairQuadratic,
};
pub use concavity::{
    check_energy_ball, check_polytope, concave_at, min_norm_boundary, spectrum, Concavity, ConcavitySpectrum,
};
pub use error::{Error, Result};
pub use estimation::{kf_step, predict_outputs, FilterState, Innovation, OutputPrediction, OutputResponse, ResponseModel};
pub use input_design::{
    design_bc, design_bd, design_ol, design_qta, design_sbc, enumerate_vertices, fw_concave_min, Certificate,
    ConstraintKind, ConstraintSet, DesignOptions, DesignResult,
};
pub use lin_models::{
    build_lifted, close_loop, dc_feedforward_gain, place_poles, steady_state_kalman_gain, ControllerGains,
    LiftedModel, NoiseModel, StateSpaceModel,
};
pub use sim::{
    build_scenario, concavity_sweep, run_monte_carlo, run_trial, simulate_step, ExperimentConfig, Method,
    TrialRecord,
};
