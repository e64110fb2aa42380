//! Local solvers over constraint sets.

use nalgebra::DVector;

use super::constraints::ConstraintSet;
use crate::error::{Error, Result};

const FW_MAX_ITER: usize = 200;
const FW_MIN_DECREASE: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

/// Result of [`fw_concave_min`].
#[derive(Debug, Clone, PartialEq)]
pub struct FwOutcome {
    pub u: DVector<f64>,
    pub value: f64,
    /// Accepted iterations summed over all starts.
    pub iterations: usize,
    /// Objective sequence of each start, beginning at the start value.
    pub traces: Vec<Vec<f64>>,
}

/// Linearize-and-minimize: each iteration solves the linear subproblem over
/// `cs` at the current gradient and moves toward it, halving the step until
/// the objective decreases. For concave objectives the full step is always
/// accepted. Returns the best point over all starts; earlier starts win ties.
pub fn fw_concave_min<F, G>(value: F, grad: G, cs: &ConstraintSet, starts: &[DVector<f64>]) -> Result<FwOutcome>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    if starts.is_empty() {
        return Err(Error::InvalidConfig("at least one start is required".into()));
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut iterations = 0;
    let mut traces = Vec::with_capacity(starts.len());
    for start in starts {
        let mut u = cs.project(start);
        let mut f = finite(value(&u))?;
        let mut trace = vec![f];
        for _ in 0..FW_MAX_ITER {
            let g = grad(&u);
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("objective gradient"));
            }
            let dir = cs.linear_minimizer(&g, &u) - &u;
            if dir.iter().all(|x| *x == 0.0) {
                break;
            }
            let mut gamma = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand = &u + &dir * gamma;
                let fc = finite(value(&cand))?;
                if fc < f {
                    accepted = Some((cand, fc));
                    break;
                }
                gamma *= 0.5;
            }
            let Some((cand, fc)) = accepted else { break };
            let decrease = f - fc;
            u = cand;
            f = fc;
            trace.push(f);
            iterations += 1;
            if decrease < FW_MIN_DECREASE {
                break;
            }
        }
        traces.push(trace);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((u, f));
        }
    }
    let (u, value) = best.expect("non-empty starts");
    Ok(FwOutcome { u, value, iterations, traces })
}

/// Projected gradient descent with a backtracking (Armijo) step search and
/// step-size growth after acceptance. Returns the best point over starts.
pub fn projected_gradient<F>(
    value_and_grad: F,
    cs: &ConstraintSet,
    starts: &[DVector<f64>],
    max_iter: usize,
) -> Result<(DVector<f64>, f64)>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    if starts.is_empty() {
        return Err(Error::InvalidConfig("at least one start is required".into()));
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    for start in starts {
        let mut u = cs.project(start);
        let (f0, mut g) = value_and_grad(&u);
        let mut f = finite(f0)?;
        let mut alpha = 1.0;
        for _ in 0..max_iter {
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand = cs.project(&(&u - &g * alpha));
                let (fc, gc) = value_and_grad(&cand);
                let fc = finite(fc)?;
                let model_decrease = g.dot(&(&u - &cand));
                if fc <= f - 1e-4 * model_decrease && fc < f {
                    accepted = Some((cand, fc, gc));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((cand, fc, gc)) = accepted else { break };
            let decrease = f - fc;
            u = cand;
            f = fc;
            g = gc;
            alpha *= 2.0;
            if decrease <= 1e-12 * f.abs().max(1e-12) {
                break;
            }
        }
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((u, f));
        }
    }
    Ok(best.expect("non-empty starts"))
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("objective value"))
    }
}
