//! Seeded closed-loop experiments, Monte-Carlo batches, built-in scenarios
//! and the concavity sweep.

mod config;
mod monte_carlo;
pub mod output;
mod scenarios;
mod sweep;
mod trial;

pub use config::{Candidate, ConstraintSpec, ExperimentConfig, Method};
pub use monte_carlo::{median, run_monte_carlo, summarize, MethodSummary, MonteCarloResult};
pub use scenarios::{build_scenario, candidate_model, feedback_controller, SCENARIOS};
pub use sweep::{concavity_sweep, default_r_grid, default_scale_grid, sweep_input, SweepCell};
pub use trial::{mix, run_trial, run_trial_with, simulate_step, NoiseSampler, StepRecord, TrialContext, TrialRecord};
