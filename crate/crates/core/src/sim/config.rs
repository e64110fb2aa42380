use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::input_design::{ConstraintSet, DEFAULT_VERTEX_CAP};
use crate::lin_models::{NoiseModel, StateSpaceModel};
use crate::matrix_serde;

/// Input-design method driving an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bd,
    Qta,
    Bc,
    Sbc,
    Ol,
    /// Passive: the constraint set's neutral point (zero, or the ball center).
    None,
}

impl Method {
    pub const ACTIVE: [Method; 5] = [Method::Ol, Method::Bd, Method::Qta, Method::Bc, Method::Sbc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bd => "bd",
            Method::Qta => "qta",
            Method::Bc => "bc",
            Method::Sbc => "sbc",
            Method::Ol => "ol",
            Method::None => "none",
        }
    }

    pub(crate) fn stream_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bd" => Ok(Method::Bd),
            "qta" => Ok(Method::Qta),
            "bc" => Ok(Method::Bc),
            "sbc" => Ok(Method::Sbc),
            "ol" => Ok(Method::Ol),
            "none" | "passive" => Ok(Method::None),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Serializable description of the per-step input constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    BoxRate {
        amp_bound: f64,
        rate_bound: f64,
        /// Input applied before the experiment starts.
        #[serde(with = "matrix_serde::vector")]
        u_prev: DVector<f64>,
    },
    EnergyBall {
        energy_bound: f64,
        #[serde(with = "matrix_serde::vector")]
        center: DVector<f64>,
    },
}

impl ConstraintSpec {
    pub fn build(&self, horizon: usize) -> Result<ConstraintSet> {
        match self {
            ConstraintSpec::BoxRate { amp_bound, rate_bound, u_prev } => {
                ConstraintSet::box_rate(*amp_bound, *rate_bound, u_prev.clone(), horizon)
            }
            ConstraintSpec::EnergyBall { energy_bound, center } => {
                ConstraintSet::energy_ball(*energy_bound, center.clone(), horizon)
            }
        }
    }
}

/// One candidate model with its noise statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model: StateSpaceModel,
    pub noise: NoiseModel,
}

fn default_ol_horizon() -> usize {
    200
}

fn default_ol_starts() -> usize {
    20
}

fn default_random_starts() -> usize {
    3
}

fn default_vertex_cap() -> usize {
    DEFAULT_VERTEX_CAP
}

/// Full description of a diagnosis experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub candidates: Vec<Candidate>,
    /// Fixed true model; when absent, batches cycle through every candidate.
    #[serde(default)]
    pub true_model: Option<usize>,
    pub constraint: ConstraintSpec,
    pub horizon: usize,
    pub decision_threshold: f64,
    pub max_steps: usize,
    #[serde(with = "matrix_serde::vector")]
    pub x0_mean: DVector<f64>,
    #[serde(with = "matrix_serde::matrix")]
    pub x0_cov: DMatrix<f64>,
    pub initial_probs: Vec<f64>,
    pub method: Method,
    #[serde(default = "default_ol_horizon")]
    pub ol_horizon: usize,
    #[serde(default = "default_ol_starts")]
    pub ol_starts: usize,
    #[serde(default = "default_random_starts")]
    pub random_starts: usize,
    #[serde(default = "default_vertex_cap")]
    pub vertex_cap: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn n_models(&self) -> usize {
        self.candidates.len()
    }

    pub fn models(&self) -> Vec<StateSpaceModel> {
        self.candidates.iter().map(|c| c.model.clone()).collect()
    }

    pub fn noises(&self) -> Vec<NoiseModel> {
        self.candidates.iter().map(|c| c.noise.clone()).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.candidates.is_empty() {
            return invalid("at least one candidate model is required");
        }
        let first = &self.candidates[0].model;
        for c in &self.candidates {
            if c.model.n_x() != first.n_x() || c.model.n_u() != first.n_u() || c.model.n_y() != first.n_y() {
                return Err(dims("candidate models differ in state, input or output size"));
            }
            c.noise.check_against(&c.model)?;
        }
        if let Some(t) = self.true_model {
            if t >= self.n_models() {
                return invalid("true model index out of range");
            }
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return invalid("decision threshold must lie in (0, 1)");
        }
        if self.horizon == 0 || self.max_steps < self.horizon {
            return invalid("need 1 <= horizon <= max_steps");
        }
        if self.ol_horizon == 0 {
            return invalid("open-loop horizon must be at least 1");
        }
        if self.initial_probs.len() != self.n_models()
            || self.initial_probs.iter().any(|p| !(*p >= 0.0))
            || (self.initial_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return invalid("initial probabilities must be non-negative, one per model, summing to 1");
        }
        if self.x0_mean.len() != first.n_x() || self.x0_cov.shape() != (first.n_x(), first.n_x()) {
            return Err(dims("initial state does not match the models"));
        }
        let cs = self.constraint.build(self.horizon)?;
        if cs.n_u != first.n_u() {
            return Err(dims("constraint set input size differs from the models"));
        }
        Ok(())
    }
}
