//! One-step-ahead Kalman prediction per candidate model and horizon
//! output prediction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::lin_models::{LiftedModel, NoiseModel, StateSpaceModel};
use crate::linalg;
use crate::matrix_serde;

/// Predicted state `x̂_{k+1|k}` and its error covariance `Ξ_{k+1|k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    #[serde(with = "matrix_serde::vector")]
    pub x_pred: DVector<f64>,
    #[serde(with = "matrix_serde::matrix")]
    pub xi_pred: DMatrix<f64>,
}

impl FilterState {
    pub fn new(x_pred: DVector<f64>, xi_pred: DMatrix<f64>) -> Result<Self> {
        if xi_pred.shape() != (x_pred.len(), x_pred.len()) {
            return Err(dims("state covariance does not match state dimension"));
        }
        if !linalg::all_finite_vec(&x_pred) || !linalg::all_finite(&xi_pred) {
            return Err(Error::NonFinite("filter state"));
        }
        Ok(Self { x_pred, xi_pred: linalg::symmetrized(xi_pred) })
    }
}

/// Gaussian parameters of the measurement before it is incorporated.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovation {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// One predictor-form Kalman step: incorporates `y_k` and propagates with
/// `u_k`, returning `x̂_{k+1|k}` together with the predictive density of
/// `y_k` used for the likelihood.
pub fn kf_step(
    fs: &FilterState,
    model: &StateSpaceModel,
    noise: &NoiseModel,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(FilterState, Innovation)> {
    if fs.x_pred.len() != model.n_x() || u.len() != model.n_u() || y.len() != model.n_y() {
        return Err(dims("kf_step: state, input or output dimension mismatch"));
    }
    let (a, b, c) = (model.a(), model.b(), model.c());
    let xi = &fs.xi_pred;

    let innov_mean = c * &fs.x_pred;
    let innov_cov = linalg::symmetrized(c * xi * c.transpose() + noise.r());
    let chol = linalg::cholesky(&innov_cov, "innovation covariance")?;

    let cross = a * xi * c.transpose() + noise.s();
    // K = cross · (C Ξ Cᵀ + R)⁻¹, via a solve on the transpose.
    let gain = chol.solve(&cross.transpose()).transpose();

    let x_next = a * &fs.x_pred + b * u + &gain * (y - &innov_mean);
    let mut xi_next = a * xi * a.transpose() + noise.q() - &gain * &innov_cov * gain.transpose();
    linalg::symmetrize(&mut xi_next);

    if !linalg::all_finite_vec(&x_next) || !linalg::all_finite(&xi_next) {
        return Err(Error::NonFinite("Kalman update"));
    }
    Ok((
        FilterState { x_pred: x_next, xi_pred: xi_next },
        Innovation { mean: innov_mean, cov: innov_cov },
    ))
}

/// Predicted output sequence `ŷ_{k|k}` and covariance `𝚺_{k|k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPrediction {
    pub y_mean: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Horizon output prediction for a given stacked input.
pub fn predict_outputs(lifted: &LiftedModel, fs: &FilterState, u_vec: &DVector<f64>) -> Result<OutputPrediction> {
    if u_vec.len() != lifted.horizon * lifted.n_u || fs.x_pred.len() != lifted.n_x {
        return Err(dims("predict_outputs: input or state dimension mismatch"));
    }
    let resp = ResponseModel::new(lifted).respond(fs)?;
    Ok(OutputPrediction { y_mean: &resp.free_mean + &resp.input_gain * u_vec, sigma: resp.sigma })
}

/// Input-independent parts of a lifted model, cached so that per-step
/// predictions only redo the state-dependent terms.
#[derive(Debug, Clone)]
pub struct ResponseModel {
    pub horizon: usize,
    pub n_y: usize,
    free_map: DMatrix<f64>,
    input_gain: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
}

impl ResponseModel {
    pub fn new(lifted: &LiftedModel) -> Self {
        Self {
            horizon: lifted.horizon,
            n_y: lifted.n_y,
            free_map: lifted.free_response(),
            input_gain: lifted.input_response(),
            noise_cov: lifted.noise_output_covariance(),
        }
    }

    pub fn input_gain(&self) -> &DMatrix<f64> {
        &self.input_gain
    }

    pub fn respond(&self, fs: &FilterState) -> Result<OutputResponse> {
        if fs.x_pred.len() != self.free_map.ncols() {
            return Err(dims("filter state does not match lifted model"));
        }
        let free_mean = &self.free_map * &fs.x_pred;
        let mut sigma = &self.free_map * &fs.xi_pred * self.free_map.transpose() + &self.noise_cov;
        linalg::symmetrize(&mut sigma);
        Ok(OutputResponse { free_mean, input_gain: self.input_gain.clone(), sigma })
    }
}

/// Affine-in-input Gaussian output prediction: mean `free_mean + input_gain·𝐮`,
/// covariance `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputResponse {
    pub free_mean: DVector<f64>,
    pub input_gain: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

impl OutputResponse {
    /// Restriction to the first `steps` output samples. The input dimension
    /// is kept so that prefix forms live in the same input space.
    pub fn prefix(&self, steps: usize, n_y: usize) -> Self {
        let rows = (steps * n_y).min(self.free_mean.len());
        Self {
            free_mean: self.free_mean.rows(0, rows).into_owned(),
            input_gain: self.input_gain.rows(0, rows).into_owned(),
            sigma: self.sigma.view((0, 0), (rows, rows)).into_owned(),
        }
    }
}
