#![allow(dead_code)]

use clafd_core::{OutputResponse, PairQuadratic};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Random symmetric positive definite matrix with eigenvalues at least `floor`.
pub fn spd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// Pair form with `H = GᵀG` of the given rank and `c = H w`, so that `c`
/// lies in the range of `H`. Only `h_mat`, `c` and `h` are meaningful.
pub fn random_pair<R: Rng>(rng: &mut R, m: usize, rank: usize, h_scale: f64, c_scale: f64) -> PairQuadratic {
    let g = gaussian_matrix(rng, rank, m);
    let h_mat = g.transpose() * &g * h_scale;
    let c = &h_mat * gaussian_vector(rng, m) * c_scale;
    PairQuadratic {
        pair: (0, 1),
        h_mat,
        c,
        h: rng.random_range(0.0..1.0),
        omega: DMatrix::identity(m, m),
        gamma: DMatrix::zeros(m, m),
        zeta: DVector::zeros(m),
    }
}

/// Static Gaussian output model `y = m + G u + e`, `e ~ N(0, Σ)`.
pub fn random_response<R: Rng>(rng: &mut R, n_y: usize, n_u: usize, gain_scale: f64) -> OutputResponse {
    OutputResponse {
        free_mean: gaussian_vector(rng, n_y) * 0.3,
        input_gain: gaussian_matrix(rng, n_y, n_u) * gain_scale,
        sigma: spd(rng, n_y, 0.5),
    }
}

/// Moore-Penrose pseudo-inverse via SVD.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().pseudo_inverse(1e-12 * m.amax().max(1e-300)).unwrap()
}
