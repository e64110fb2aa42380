//! Concavity domain of a Gaussian Bhattacharyya coefficient
//! `𝔅(u) = exp(−uᵀHu − cᵀu − h)` and the online checks built on it.
//!
//! With `H = U₁Λ₁U₁ᵀ` and `c ∈ range(U₁)`, the coefficient is concave
//! exactly where the level
//!
//! ```text
//! ρ²(u) = uᵀHu + cᵀu + ¼cᵀU₁Λ₁⁻¹U₁ᵀc ≤ ½.
//! ```
//!
//! The region is an ellipsoidal cylinder, so checking polytope vertices
//! suffices; for energy balls the minimum-norm point on its boundary gives
//! a certified radius.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::bhattacharyya::PairQuadratic;
use crate::error::{Error, Result};
use crate::linalg;

/// Relative eigenvalue cut-off splitting `H` into range and null space.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Largest admissible null-space share `‖U₂ᵀc‖ / ‖c‖` for a certificate.
pub const NULL_SPACE_TOL: f64 = 1e-8;

/// Outcome of a concavity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concavity {
    Concave,
    NotConcave,
    /// `c` has a significant component outside `range(H)`; no claim is made.
    Uncertified,
}

impl Concavity {
    pub fn is_concave(self) -> bool {
        self == Concavity::Concave
    }

    /// Combines per-pair verdicts: every pair must be concave.
    pub fn and(self, other: Concavity) -> Concavity {
        use Concavity::*;
        match (self, other) {
            (Uncertified, _) | (_, Uncertified) => Uncertified,
            (NotConcave, _) | (_, NotConcave) => NotConcave,
            _ => Concave,
        }
    }
}

/// Range/null-space split of `H` from its symmetric eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavitySpectrum {
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    /// Positive eigenvalues of the range part, descending.
    pub lambda1: DVector<f64>,
    pub rank_tol: f64,
}

impl ConcavitySpectrum {
    pub fn rank(&self) -> usize {
        self.lambda1.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.rank() == 0
    }

    /// `¼cᵀU₁Λ₁⁻¹U₁ᵀc`.
    pub fn kappa(&self, c: &DVector<f64>) -> f64 {
        let c1 = self.u1.transpose() * c;
        0.25 * c1.iter().zip(self.lambda1.iter()).map(|(ci, l)| ci * ci / l).sum::<f64>()
    }

    /// Whether `c` lies in `range(H)` up to [`NULL_SPACE_TOL`].
    pub fn supports(&self, c: &DVector<f64>) -> bool {
        let norm = c.norm();
        if norm == 0.0 || self.u2.ncols() == 0 {
            return true;
        }
        (self.u2.transpose() * c).norm() <= NULL_SPACE_TOL * norm
    }
}

/// Eigen-split of `pq.h_mat` at `rank_tol · λ_max`.
pub fn spectrum(pq: &PairQuadratic, rank_tol: f64) -> ConcavitySpectrum {
    spectrum_of(&pq.h_mat, rank_tol)
}

pub fn spectrum_of(h: &DMatrix<f64>, rank_tol: f64) -> ConcavitySpectrum {
    let m = h.nrows();
    let eig = SymmetricEigen::new(linalg::symmetrized(h.clone()));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lmax = order.first().map_or(0.0, |&i| eig.eigenvalues[i]).max(0.0);
    let cut = rank_tol * lmax;
    let r = if lmax > 0.0 { order.iter().take_while(|&&i| eig.eigenvalues[i] > cut).count() } else { 0 };

    let mut u1 = DMatrix::zeros(m, r);
    let mut u2 = DMatrix::zeros(m, m - r);
    let mut lambda1 = DVector::zeros(r);
    for (k, &i) in order.iter().enumerate() {
        if k < r {
            u1.set_column(k, &eig.eigenvectors.column(i));
            lambda1[k] = eig.eigenvalues[i];
        } else {
            u2.set_column(k - r, &eig.eigenvectors.column(i));
        }
    }
    ConcavitySpectrum { u1, u2, lambda1, rank_tol }
}

/// `ρ²(u) = uᵀHu + cᵀu + κ`.
pub fn level(pq: &PairQuadratic, spec: &ConcavitySpectrum, u: &DVector<f64>) -> f64 {
    pq.distance(u) - pq.h + spec.kappa(&pq.c)
}

pub fn concave_at(pq: &PairQuadratic, spec: &ConcavitySpectrum, u: &DVector<f64>) -> Concavity {
    if !spec.supports(&pq.c) {
        return Concavity::Uncertified;
    }
    if level(pq, spec, u) <= 0.5 {
        Concavity::Concave
    } else {
        Concavity::NotConcave
    }
}

/// Concavity over a polytope, checked at its vertices.
pub fn check_polytope(pq: &PairQuadratic, spec: &ConcavitySpectrum, vertices: &[DVector<f64>]) -> Concavity {
    if !spec.supports(&pq.c) {
        return Concavity::Uncertified;
    }
    let kappa = spec.kappa(&pq.c);
    let all = vertices.iter().all(|v| pq.distance(v) - pq.h + kappa <= 0.5);
    if all {
        Concavity::Concave
    } else {
        Concavity::NotConcave
    }
}

/// Bracket of the Lagrange multiplier for the minimum-norm boundary
/// problem, in the sorted and sign-normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RootBracket {
    pub tau_minus: f64,
    pub tau_plus: f64,
    /// Range eigenvalues, descending.
    pub lambda: DVector<f64>,
    /// Sign-normalized linear coefficients, all `≥ 0`.
    pub b: DVector<f64>,
}

impl RootBracket {
    /// `‖q(τ)‖² = Σ b_i² / (4(τ − λ_i⁻¹)²)`, monotone increasing below `λ₁⁻¹`.
    pub fn radius_sq(&self, tau: f64) -> f64 {
        self.b
            .iter()
            .zip(self.lambda.iter())
            .filter(|(b, _)| **b > 0.0)
            .map(|(b, l)| {
                let d = tau - 1.0 / l;
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    b * b / (4.0 * d * d)
                }
            })
            .sum()
    }

    fn point(&self, tau: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.b.len(),
            self.b.iter().zip(self.lambda.iter()).map(|(b, l)| if *b > 0.0 { b / (2.0 * (tau - 1.0 / l)) } else { 0.0 }),
        )
    }
}

struct Transformed {
    bracket: RootBracket,
    signs: DVector<f64>,
    c1: DVector<f64>,
}

fn transform(spec: &ConcavitySpectrum, c: &DVector<f64>) -> Result<Transformed> {
    if spec.is_degenerate() {
        return Err(Error::NoCurvature);
    }
    let n = spec.rank();
    let c1 = spec.u1.transpose() * c;
    let lambda = spec.lambda1.clone();
    let mut signs = DVector::from_element(n, 1.0);
    let mut b = DVector::zeros(n);
    for i in 0..n {
        let a = c1[i] / lambda[i].powf(1.5);
        if a > 0.0 {
            signs[i] = -1.0;
        }
        b[i] = a.abs();
    }

    let tau_max = 1.0 / lambda[0];
    let mut tau_minus = f64::INFINITY;
    let mut tau_plus = f64::INFINITY;
    for i in 0..n {
        if b[i] > 0.0 {
            let inv = 1.0 / lambda[i];
            tau_minus = tau_minus.min(inv - (n as f64 / 2.0).sqrt() * b[i]);
            tau_plus = tau_plus.min(inv - b[i] / 2.0_f64.sqrt());
        }
    }
    let tau_plus = tau_plus.min(tau_max);
    let tau_minus = tau_minus.min(tau_plus);
    Ok(Transformed { bracket: RootBracket { tau_minus, tau_plus, lambda, b }, signs, c1 })
}

/// Multiplier bracket `[τ−, τ+]` for `c` under `spec`.
pub fn root_bracket(spec: &ConcavitySpectrum, c: &DVector<f64>) -> Result<RootBracket> {
    Ok(transform(spec, c)?.bracket)
}

/// Minimum-norm `z` on the boundary `zᵀHz + cᵀz + κ = ½`.
pub fn min_norm_boundary(spec: &ConcavitySpectrum, c: &DVector<f64>) -> Result<DVector<f64>> {
    let Transformed { bracket, signs, c1 } = transform(spec, c)?;
    let n = bracket.lambda.len();
    let half: f64 = 0.5;

    let q = if bracket.b.iter().all(|b| *b == 0.0) {
        // c = 0: the boundary is nearest along the largest-curvature axis.
        let mut q = DVector::zeros(n);
        q[0] = -half.sqrt();
        q
    } else if bracket.b[0] == 0.0 && bracket.radius_sq(bracket.tau_plus) < half {
        // Hard case: b vanishes on the top eigen-direction, the multiplier
        // sits at λ₁⁻¹ and the remaining mass goes on that axis.
        let mut q = bracket.point(bracket.tau_plus);
        let rest = (half - q.norm_squared()).max(0.0);
        q[0] = -rest.sqrt();
        q
    } else {
        let (mut lo, mut hi) = (bracket.tau_minus, bracket.tau_plus);
        for _ in 0..200 {
            if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if bracket.radius_sq(mid) < half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut q = bracket.point(0.5 * (lo + hi));
        let norm = q.norm();
        if norm > 0.0 {
            q *= half.sqrt() / norm;
        }
        q
    };

    // Undo the sign normalization, then g → z₁ = Λ^{-1/2} g − ½Λ⁻¹c₁.
    let z1 = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let g = signs[i] * q[i];
            let l = bracket.lambda[i];
            g / l.sqrt() - 0.5 * c1[i] / l
        }),
    );
    Ok(&spec.u1 * z1)
}

/// Certificate for the per-step energy balls `‖u_ℓ‖² ≤ ε`, `ℓ = 1..N`,
/// whose union lies in the ball of radius `√(εN)`.
pub fn check_energy_ball(pq: &PairQuadratic, spec: &ConcavitySpectrum, energy_bound: f64, horizon: usize) -> Concavity {
    if !spec.supports(&pq.c) {
        return Concavity::Uncertified;
    }
    if spec.kappa(&pq.c) > 0.5 {
        return Concavity::NotConcave;
    }
    if spec.is_degenerate() {
        return Concavity::Concave;
    }
    match min_norm_boundary(spec, &pq.c) {
        Ok(z) if (energy_bound * horizon as f64).sqrt() <= z.norm() => Concavity::Concave,
        Ok(_) => Concavity::NotConcave,
        Err(_) => Concavity::Uncertified,
    }
}
