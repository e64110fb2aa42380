//! Model-probability bookkeeping in the log domain.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{dims, Error, Result};
use crate::estimation::FilterState;
use crate::linalg;

/// Model probabilities together with every candidate's filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    log_probs: Vec<f64>,
    pub filters: Vec<FilterState>,
}

impl BeliefState {
    /// Builds a belief from (not necessarily normalized) probabilities.
    pub fn new(probs: &[f64], filters: Vec<FilterState>) -> Result<Self> {
        if probs.len() != filters.len() || probs.is_empty() {
            return Err(dims("one probability per filter is required"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig("probabilities must be finite and non-negative".into()));
        }
        let logs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
        let norm = log_sum_exp(&logs);
        if !norm.is_finite() {
            return Err(Error::InvalidConfig("probabilities sum to zero".into()));
        }
        Ok(Self { log_probs: logs.iter().map(|l| l - norm).collect(), filters })
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn n_models(&self) -> usize {
        self.log_probs.len()
    }

    /// `√(P_i P_j)`.
    pub fn pair_weight(&self, i: usize, j: usize) -> f64 {
        (0.5 * (self.log_probs[i] + self.log_probs[j])).exp()
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log N(y; mean, cov)`.
pub fn gaussian_loglik(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    if y.len() != mean.len() || cov.shape() != (y.len(), y.len()) {
        return Err(dims("gaussian_loglik: dimension mismatch"));
    }
    let chol = linalg::cholesky(&linalg::symmetrized(cov.clone()), "likelihood covariance")?;
    let r = y - mean;
    let quad = r.dot(&chol.solve(&r));
    let n = y.len() as f64;
    Ok(-0.5 * (quad + linalg::log_det(&chol) + n * (2.0 * PI).ln()))
}

/// Bayes rule in the log domain; filter states are carried over unchanged.
pub fn update_beliefs(b: &BeliefState, logliks: &[f64]) -> Result<BeliefState> {
    if logliks.len() != b.n_models() {
        return Err(dims("one log-likelihood per model is required"));
    }
    if logliks.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NonFinite("log-likelihoods"));
    }
    let joint: Vec<f64> = b.log_probs.iter().zip(logliks).map(|(p, l)| p + l).collect();
    let norm = log_sum_exp(&joint);
    if norm == f64::NEG_INFINITY {
        return Err(Error::ImpossibleMeasurement);
    }
    Ok(BeliefState { log_probs: joint.iter().map(|j| j - norm).collect(), filters: b.filters.clone() })
}

/// Probability of misdiagnosis when the most likely model is chosen.
pub fn error_probability(b: &BeliefState) -> f64 {
    let max = b.log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    1.0 - max.exp()
}

/// Index of the most likely model if its probability exceeds `threshold`.
/// Ties go to the lowest index.
pub fn decide(b: &BeliefState, threshold: f64) -> Option<usize> {
    let mut best = 0;
    for (i, lp) in b.log_probs.iter().enumerate() {
        if *lp > b.log_probs[best] {
            best = i;
        }
    }
    (b.log_probs[best].exp() > threshold).then_some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dummy_filters(n: usize) -> Vec<FilterState> {
        (0..n).map(|_| FilterState::new(DVector::zeros(1), DMatrix::zeros(1, 1)).unwrap()).collect()
    }

    fn belief(p: &[f64]) -> BeliefState {
        BeliefState::new(p, dummy_filters(p.len())).unwrap()
    }

    #[test]
    fn loglik_analytic_values() {
        let l = gaussian_loglik(&DVector::zeros(2), &DVector::zeros(2), &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(l, -(2.0 * PI).ln(), epsilon = 1e-14);
        assert_relative_eq!(l, -1.837877, epsilon = 1e-6);
        let l = gaussian_loglik(&DVector::from_element(1, 1.0), &DVector::zeros(1), &DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(l, -1.418939, epsilon = 1e-6);
    }

    #[test]
    fn loglik_rejects_non_pd() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(gaussian_loglik(&DVector::zeros(2), &DVector::zeros(2), &cov).is_err());
    }

    #[test]
    fn loglik_matches_quadrature_in_three_dimensions() {
        // Oracle: the density integrates to one, and its log at a point
        // equals the log of (normalizing constant)⁻¹·exp(−½ quad) where the
        // normalizing constant is integrated numerically on a grid.
        let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.3, 0.8, 0.0, -0.2, 0.1, 0.6]);
        let cov = &l * l.transpose();
        let mean = DVector::from_vec(vec![0.2, -0.1, 0.4]);
        let y = DVector::from_vec(vec![0.5, 0.3, -0.2]);
        let inv = cov.clone().try_inverse().unwrap();
        let quad = |x: &DVector<f64>| {
            let r = x - &mean;
            (r.transpose() * &inv * &r)[(0, 0)]
        };
        // Midpoint rule over ±7σ in whitened coordinates x = mean + L z.
        let n = 120;
        let h = 14.0 / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let z = DVector::from_vec(vec![
                        -7.0 + (i as f64 + 0.5) * h,
                        -7.0 + (j as f64 + 0.5) * h,
                        -7.0 + (k as f64 + 0.5) * h,
                    ]);
                    integral += (-0.5 * z.norm_squared()).exp();
                }
            }
        }
        let det_l = l.determinant();
        let norm_const = integral * h * h * h * det_l;
        let oracle = -0.5 * quad(&y) - norm_const.ln();
        let got = gaussian_loglik(&y, &mean, &cov).unwrap();
        assert_relative_eq!(got, oracle, epsilon = 1e-6);
    }

    #[test]
    fn bayes_analytic_cases() {
        let b = belief(&[0.5, 0.5]);
        let u = update_beliefs(&b, &[3.0_f64.ln(), 0.0]).unwrap();
        assert_relative_eq!(u.probs()[0], 0.75, epsilon = 1e-14);
        assert_relative_eq!(u.probs()[1], 0.25, epsilon = 1e-14);

        let b = belief(&[0.2, 0.3, 0.5]);
        let u = update_beliefs(&b, &[-1.0, -1.0, -1.0]).unwrap();
        for (x, y) in u.probs().iter().zip(b.probs()) {
            assert_relative_eq!(*x, y, epsilon = 1e-14);
        }

        let u = update_beliefs(&b, &[f64::NEG_INFINITY, 0.0, 0.0]).unwrap();
        assert_eq!(u.probs()[0], 0.0);
        assert_relative_eq!(u.probs()[1], 0.375, epsilon = 1e-14);

        let all_impossible = update_beliefs(&b, &[f64::NEG_INFINITY; 3]);
        assert!(matches!(all_impossible, Err(Error::ImpossibleMeasurement)));
    }

    #[test]
    fn error_probability_cases() {
        assert_relative_eq!(error_probability(&belief(&[0.98, 0.01, 0.01])), 0.02, epsilon = 1e-12);
        assert_relative_eq!(error_probability(&belief(&[0.2; 5])), 0.8, epsilon = 1e-12);
        assert_eq!(error_probability(&belief(&[1.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn decide_cases() {
        assert_eq!(decide(&belief(&[0.99, 0.01]), 0.98), Some(0));
        assert_eq!(decide(&belief(&[0.97, 0.03]), 0.98), None);
        assert_eq!(decide(&belief(&[0.2; 5]), 0.98), None);
        assert_eq!(decide(&belief(&[0.5, 0.5]), 0.4), Some(0));
    }

    proptest! {
        #[test]
        fn updates_stay_normalized(
            priors in prop::collection::vec(0.01f64..1.0, 2..6),
            steps in prop::collection::vec(prop::collection::vec(-50.0f64..5.0, 6), 1..40),
        ) {
            let mut b = belief(&priors);
            for ll in &steps {
                b = update_beliefs(&b, &ll[..priors.len()]).unwrap();
                let s: f64 = b.probs().iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(b.log_probs().iter().all(|l| *l <= 0.0));
            }
        }

        #[test]
        fn constant_loglik_shift_is_invariant(
            priors in prop::collection::vec(0.01f64..1.0, 2..6),
            ll in prop::collection::vec(-20.0f64..5.0, 6),
            shift in -100.0f64..100.0,
        ) {
            let n = priors.len();
            let b = belief(&priors);
            let a = update_beliefs(&b, &ll[..n]).unwrap();
            let shifted: Vec<f64> = ll[..n].iter().map(|x| x + shift).collect();
            let c = update_beliefs(&b, &shifted).unwrap();
            for (x, y) in a.probs().iter().zip(c.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
