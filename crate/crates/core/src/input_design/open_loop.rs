//! Offline long-horizon design, computed once before the experiment.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::constraints::{ConstraintKind, ConstraintSet};
use super::objective::{Objective, QuadForm};
use super::solvers::projected_gradient;
use crate::bhattacharyya::all_pairs;
use crate::error::{dims, Result};
use crate::estimation::{FilterState, ResponseModel};
use crate::lin_models::{build_lifted, NoiseModel, StateSpaceModel};

const OL_MAX_ITER: usize = 300;

/// An offline input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OlPlan {
    pub u_seq: DVector<f64>,
    pub objective_value: f64,
    pub n_u: usize,
}

impl OlPlan {
    pub fn len(&self) -> usize {
        self.u_seq.len() / self.n_u
    }

    pub fn is_empty(&self) -> bool {
        self.u_seq.is_empty()
    }

    /// Input for experiment step `t`; the sequence repeats once exhausted.
    /// On repetition a box-rate set may be violated at the seam, so the
    /// input is clipped against the last applied one.
    pub fn input_at(&self, t: usize, cs: &ConstraintSet) -> DVector<f64> {
        let l = t % self.len();
        let raw = self.u_seq.rows(l * self.n_u, self.n_u).into_owned();
        match &cs.kind {
            ConstraintKind::BoxRate { amp_bound, rate_bound, u_prev } => DVector::from_fn(self.n_u, |i, _| {
                let lo = (-amp_bound).max(u_prev[i] - rate_bound);
                let hi = amp_bound.min(u_prev[i] + rate_bound);
                raw[i].clamp(lo, hi)
            }),
            ConstraintKind::EnergyBall { .. } => raw,
        }
    }
}

/// Minimizes the weighted bound over `horizon` steps from the initial
/// filter states and probabilities, with `n_starts` projected-gradient runs
/// (the neutral point and random feasible points).
pub fn design_ol(
    models: &[StateSpaceModel],
    noises: &[NoiseModel],
    filters: &[FilterState],
    probs: &[f64],
    cs: &ConstraintSet,
    horizon: usize,
    n_starts: usize,
    seed: u64,
) -> Result<OlPlan> {
    if models.len() != noises.len() || models.len() != filters.len() || models.len() != probs.len() {
        return Err(dims("design_ol: one noise model, filter and probability per model"));
    }
    let cs = cs.with_horizon(horizon)?;
    let mut responses = Vec::with_capacity(models.len());
    for ((m, n), f) in models.iter().zip(noises).zip(filters) {
        if m.n_u() != cs.n_u {
            return Err(dims("design_ol: input dimension differs from the constraint set"));
        }
        responses.push(ResponseModel::new(&build_lifted(m, n, horizon)?).respond(f)?);
    }
    let total: f64 = probs.iter().sum();
    let terms: Vec<(f64, QuadForm)> = all_pairs(&responses)?
        .iter()
        .map(|pq| ((probs[pq.pair.0] * probs[pq.pair.1]).sqrt() / total, QuadForm::distance(pq)))
        .filter(|(w, _)| *w > 0.0)
        .collect();
    let obj = Objective::CoefficientSum(terms);
    if obj.is_flat() {
        let u = cs.neutral_point();
        return Ok(OlPlan { objective_value: obj.value(&u), u_seq: u, n_u: cs.n_u });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![cs.neutral_point()];
    starts.extend((1..n_starts.max(1)).map(|_| cs.random_point(&mut rng)));
    let (u, value) = projected_gradient(|u| obj.value_and_grad(u), &cs, &starts, OL_MAX_ITER)?;
    Ok(OlPlan { u_seq: u, objective_value: value, n_u: cs.n_u })
}
