use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::initial_filter;
use crate::bhattacharyya::pair_quadratic;
use crate::concavity::{self, Concavity, DEFAULT_RANK_TOL};
use crate::error::{dims, Result};
use crate::lin_models::{build_lifted, NoiseModel, StateSpaceModel};

/// One cell of the concavity grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    #[serde(rename = "R")]
    pub r: f64,
    pub scale: f64,
    pub pass: bool,
}

/// Stacked input used for the sweep: two channels over five steps.
pub fn sweep_input() -> DVector<f64> {
    DVector::from_vec(vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 0.0, 0.0])
}

pub fn default_r_grid() -> Vec<f64> {
    (0..=12).map(|k| 10f64.powf(-1.0 + k as f64 / 4.0)).collect()
}

pub fn default_scale_grid() -> Vec<f64> {
    (0..=10).map(|k| 1.0 + 0.1 * k as f64).collect()
}

/// Concavity of the pair coefficient at `u_fixed` for the first candidate
/// and a copy with its output matrix scaled, over measurement noise
/// `R = r·I`. Filter states come from the configured initial condition.
pub fn concavity_sweep(
    base: &ExperimentConfig,
    r_values: &[f64],
    scales: &[f64],
    u_fixed: &DVector<f64>,
) -> Result<Vec<SweepCell>> {
    let m0 = &base.candidates[0].model;
    if u_fixed.len() != base.horizon * m0.n_u() {
        return Err(dims("sweep input must span the horizon"));
    }
    let q = base.candidates[0].noise.q().clone();
    let fs = initial_filter(base)?;
    let mut cells = Vec::with_capacity(r_values.len() * scales.len());
    for &r in r_values {
        let noise = NoiseModel::uncorrelated(q.clone(), DMatrix::identity(m0.n_y(), m0.n_y()) * r)?;
        let l0 = build_lifted(m0, &noise, base.horizon)?;
        for &scale in scales {
            let m1 = StateSpaceModel::new(m0.a().clone(), m0.b().clone(), m0.c() * scale)?;
            let l1 = build_lifted(&m1, &noise, base.horizon)?;
            let pq = pair_quadratic(&l0, &l1, &fs, &fs, (0, 1))?;
            let spec = concavity::spectrum(&pq, DEFAULT_RANK_TOL);
            let pass = concavity::concave_at(&pq, &spec, u_fixed) == Concavity::Concave;
            cells.push(SweepCell { r, scale, pass });
        }
    }
    Ok(cells)
}
