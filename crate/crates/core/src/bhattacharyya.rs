//! Bhattacharyya distance between two candidate models' predicted output
//! distributions, as a quadratic function of the stacked input, and the
//! weighted error-probability bound built from it.
//!
//! For predictions `N(m_i + G_i 𝐮, Σ_i)` and `N(m_j + G_j 𝐮, Σ_j)`:
//!
//! ```text
//! Ω = Σ_i + Σ_j,   Γ = G_i − G_j,   ζ = m_i − m_j
//! d(𝐮) = 𝐮ᵀH𝐮 + cᵀ𝐮 + h,  H = ¼ΓᵀΩ⁻¹Γ,  c = ½ΓᵀΩ⁻¹ζ
//! h = ¼ζᵀΩ⁻¹ζ + ½ log(|½Ω| / √(|Σ_i||Σ_j|))
//! ```

use nalgebra::{DMatrix, DVector};

use crate::bayes::BeliefState;
use crate::error::{dims, Result};
use crate::estimation::{FilterState, OutputResponse, ResponseModel};
use crate::lin_models::LiftedModel;
use crate::linalg;

/// Quadratic form of the Bhattacharyya distance for one model pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairQuadratic {
    pub pair: (usize, usize),
    pub h_mat: DMatrix<f64>,
    pub c: DVector<f64>,
    pub h: f64,
    pub omega: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub zeta: DVector<f64>,
}

impl PairQuadratic {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn distance(&self, u: &DVector<f64>) -> f64 {
        let hu = &self.h_mat * u;
        u.dot(&hu) + self.c.dot(u) + self.h
    }

    pub fn coefficient(&self, u: &DVector<f64>) -> f64 {
        (-self.distance(u)).exp()
    }

    /// Gradient of the coefficient: `−𝔅(u)(2Hu + c)`.
    pub fn coefficient_grad(&self, u: &DVector<f64>) -> DVector<f64> {
        let slope = 2.0 * (&self.h_mat * u) + &self.c;
        slope * (-self.coefficient(u))
    }

    /// The same distance expressed in shifted coordinates `u' = u − center`.
    pub fn translated(&self, center: &DVector<f64>) -> Self {
        let mut out = self.clone();
        out.c = &self.c + 2.0 * (&self.h_mat * center);
        out.h = self.distance(center);
        // ζ absorbs the fixed part of the input response.
        out.zeta = &self.zeta + &self.gamma * center;
        out
    }

    /// Second-order expansion of the coefficient around `u = 0`:
    /// `𝔅(0)(½uᵀ(ccᵀ − 2H)u − cᵀu + 1)`.
    pub fn taylor_value(&self, u: &DVector<f64>) -> f64 {
        let (p, q, r) = self.taylor_form();
        u.dot(&(&p * u)) + q.dot(u) + r
    }

    /// Coefficients `(P, q, r)` of the expansion written as `uᵀPu + qᵀu + r`.
    pub fn taylor_form(&self) -> (DMatrix<f64>, DVector<f64>, f64) {
        let b0 = (-self.h).exp();
        let mut p = (&self.c * self.c.transpose() - 2.0 * &self.h_mat) * (0.5 * b0);
        linalg::symmetrize(&mut p);
        (p, &self.c * (-b0), b0)
    }
}

/// Pair form from two Gaussian output predictions that are affine in the input.
pub fn pair_quadratic_from_responses(
    ri: &OutputResponse,
    rj: &OutputResponse,
    pair: (usize, usize),
) -> Result<PairQuadratic> {
    if ri.input_gain.shape() != rj.input_gain.shape() || ri.sigma.shape() != rj.sigma.shape() {
        return Err(dims("pair_quadratic: predictions have different shapes"));
    }
    let omega = linalg::symmetrized(&ri.sigma + &rj.sigma);
    let chol = linalg::cholesky(&omega, "Omega")?;
    let gamma = &ri.input_gain - &rj.input_gain;
    let zeta = &ri.free_mean - &rj.free_mean;

    let omega_inv_gamma = chol.solve(&gamma);
    let omega_inv_zeta = chol.solve(&zeta);
    let h_mat = linalg::symmetrized(gamma.transpose() * &omega_inv_gamma * 0.25);
    let c = gamma.transpose() * &omega_inv_zeta * 0.5;

    let log_det_half_omega = linalg::log_det(&chol) - (omega.nrows() as f64) * 2.0_f64.ln();
    let log_det_i = linalg::log_det(&linalg::cholesky(&ri.sigma, "Sigma_i")?);
    let log_det_j = linalg::log_det(&linalg::cholesky(&rj.sigma, "Sigma_j")?);
    let h = 0.25 * zeta.dot(&omega_inv_zeta) + 0.5 * (log_det_half_omega - 0.5 * (log_det_i + log_det_j));

    Ok(PairQuadratic { pair, h_mat, c, h, omega, gamma, zeta })
}

/// Pair form for models `i` and `j` over the lifted horizon.
pub fn pair_quadratic(
    lifted_i: &LiftedModel,
    lifted_j: &LiftedModel,
    fs_i: &FilterState,
    fs_j: &FilterState,
    pair: (usize, usize),
) -> Result<PairQuadratic> {
    if lifted_i.horizon != lifted_j.horizon || lifted_i.n_u != lifted_j.n_u || lifted_i.n_y != lifted_j.n_y {
        return Err(dims("pair_quadratic: lifts differ in horizon or input/output size"));
    }
    let ri = ResponseModel::new(lifted_i).respond(fs_i)?;
    let rj = ResponseModel::new(lifted_j).respond(fs_j)?;
    pair_quadratic_from_responses(&ri, &rj, pair)
}

/// All `i < j` pair forms from per-model predictions.
pub fn all_pairs(responses: &[OutputResponse]) -> Result<Vec<PairQuadratic>> {
    let mut pairs = Vec::with_capacity(responses.len() * responses.len().saturating_sub(1) / 2);
    for i in 0..responses.len() {
        for j in (i + 1)..responses.len() {
            pairs.push(pair_quadratic_from_responses(&responses[i], &responses[j], (i, j))?);
        }
    }
    Ok(pairs)
}

pub fn bhatt_distance(pq: &PairQuadratic, u: &DVector<f64>) -> f64 {
    pq.distance(u)
}

pub fn bhatt_coefficient(pq: &PairQuadratic, u: &DVector<f64>) -> f64 {
    pq.coefficient(u)
}

/// `Σ_{i<j} √(P_i P_j) 𝔅^{ij}(u)`.
pub fn weighted_bound(pairs: &[PairQuadratic], b: &BeliefState, u: &DVector<f64>) -> f64 {
    pairs
        .iter()
        .map(|pq| {
            let w = b.pair_weight(pq.pair.0, pq.pair.1);
            if w == 0.0 {
                0.0
            } else {
                w * pq.coefficient(u)
            }
        })
        .sum()
}

pub fn weighted_bound_grad(pairs: &[PairQuadratic], b: &BeliefState, u: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(u.len());
    for pq in pairs {
        let w = b.pair_weight(pq.pair.0, pq.pair.1);
        if w != 0.0 {
            g += pq.coefficient_grad(u) * w;
        }
    }
    g
}

pub fn taylor_value(pq: &PairQuadratic, u: &DVector<f64>) -> f64 {
    pq.taylor_value(u)
}

pub fn taylor_form(pq: &PairQuadratic) -> (DMatrix<f64>, DVector<f64>, f64) {
    pq.taylor_form()
}
