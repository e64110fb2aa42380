//! Candidate model representation, horizon lifting and feedback-loop
//! augmentation.
//!
//! A candidate hypothesis is the linear Gaussian model
//!
//! ```text
//! x_{k+1} = A x_k + B u_k + w_k
//! y_k     = C x_k + v_k,        cov([v; w]) = [[R, Sᵀ], [S, Q]]
//! ```
//!
//! Over a horizon of `N` steps the model is stacked as
//! `𝐱 = 𝐀 x + 𝒯_A 𝐁 𝐮 + 𝒯_A 𝐰`, `𝐲 = 𝐂 𝐱 + 𝐯`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::linalg::{self, block_diag_repeat};
use crate::matrix_serde::{from_rows, to_rows};

/// State-space matrices of one candidate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStateSpace", into = "RawStateSpace")]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(dims(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        let n_x = a.nrows();
        if b.nrows() != n_x {
            return Err(dims(format!("B has {} rows, expected {n_x}", b.nrows())));
        }
        if c.ncols() != n_x {
            return Err(dims(format!("C has {} columns, expected {n_x}", c.ncols())));
        }
        if !(linalg::all_finite(&a) && linalg::all_finite(&b) && linalg::all_finite(&c)) {
            return Err(Error::NonFinite("state-space matrices"));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.n_x() == other.n_x() && self.n_u() == other.n_u() && self.n_y() == other.n_y()
    }
}

#[derive(Serialize, Deserialize)]
struct RawStateSpace {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl TryFrom<RawStateSpace> for StateSpaceModel {
    type Error = Error;

    fn try_from(raw: RawStateSpace) -> Result<Self> {
        let conv = |rows: &[Vec<f64>]| from_rows(rows).map_err(Error::InvalidConfig);
        Self::new(conv(&raw.a)?, conv(&raw.b)?, conv(&raw.c)?)
    }
}

impl From<StateSpaceModel> for RawStateSpace {
    fn from(m: StateSpaceModel) -> Self {
        Self { a: to_rows(&m.a), b: to_rows(&m.b), c: to_rows(&m.c) }
    }
}

/// Joint process/measurement noise statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoise", into = "RawNoise")]
pub struct NoiseModel {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    s: DMatrix<f64>,
}

impl NoiseModel {
    /// Validates that `R` is positive definite and `[[R, Sᵀ], [S, Q]]` is PSD.
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || !r.is_square() {
            return Err(dims("Q and R must be square"));
        }
        if s.nrows() != q.nrows() || s.ncols() != r.nrows() {
            return Err(dims(format!(
                "S is {}x{}, expected {}x{}",
                s.nrows(),
                s.ncols(),
                q.nrows(),
                r.nrows()
            )));
        }
        linalg::cholesky(&linalg::symmetrized(r.clone()), "R")?;
        let noise = Self { q, r, s };
        linalg::check_psd(&noise.joint(), "joint noise covariance")?;
        Ok(noise)
    }

    /// White noise with no cross-correlation.
    pub fn uncorrelated(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let s = DMatrix::zeros(q.nrows(), r.nrows());
        Self::new(q, r, s)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// `[[R, Sᵀ], [S, Q]]`, ordered as `[v; w]`.
    pub fn joint(&self) -> DMatrix<f64> {
        let (ny, nx) = (self.r.nrows(), self.q.nrows());
        let mut j = DMatrix::zeros(ny + nx, ny + nx);
        j.view_mut((0, 0), (ny, ny)).copy_from(&self.r);
        j.view_mut((0, ny), (ny, nx)).copy_from(&self.s.transpose());
        j.view_mut((ny, 0), (nx, ny)).copy_from(&self.s);
        j.view_mut((ny, ny), (nx, nx)).copy_from(&self.q);
        j
    }

    pub fn check_against(&self, model: &StateSpaceModel) -> Result<()> {
        if self.q.nrows() != model.n_x() || self.r.nrows() != model.n_y() {
            return Err(dims(format!(
                "noise is for n_x={}, n_y={}, model has n_x={}, n_y={}",
                self.q.nrows(),
                self.r.nrows(),
                model.n_x(),
                model.n_y()
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawNoise {
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
}

impl TryFrom<RawNoise> for NoiseModel {
    type Error = Error;

    fn try_from(raw: RawNoise) -> Result<Self> {
        let conv = |rows: &[Vec<f64>]| from_rows(rows).map_err(Error::InvalidConfig);
        let q = conv(&raw.q)?;
        let r = conv(&raw.r)?;
        // An empty S means "no cross-correlation".
        let s = if raw.s.is_empty() { DMatrix::zeros(q.nrows(), r.nrows()) } else { conv(&raw.s)? };
        Self::new(q, r, s)
    }
}

impl From<NoiseModel> for RawNoise {
    fn from(n: NoiseModel) -> Self {
        Self { q: to_rows(&n.q), r: to_rows(&n.r), s: to_rows(&n.s) }
    }
}

/// Horizon-stacked model matrices.
///
/// `bold_s` holds `E[𝐰 𝐯ᵀ] = I_N ⊗ S` for the noise samples that drive the
/// stacked state and output over the same steps.
#[derive(Debug, Clone)]
pub struct LiftedModel {
    pub horizon: usize,
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub bold_a: DMatrix<f64>,
    pub bold_b: DMatrix<f64>,
    pub bold_c: DMatrix<f64>,
    pub toeplitz_a: DMatrix<f64>,
    pub bold_q: DMatrix<f64>,
    pub bold_r: DMatrix<f64>,
    pub bold_s: DMatrix<f64>,
}

impl LiftedModel {
    /// `𝐂 𝒯_A 𝐁`: stacked output response to the stacked input.
    pub fn input_response(&self) -> DMatrix<f64> {
        &self.bold_c * (&self.toeplitz_a * &self.bold_b)
    }

    /// `𝐂 𝐀`: stacked free response to the initial state.
    pub fn free_response(&self) -> DMatrix<f64> {
        &self.bold_c * &self.bold_a
    }

    /// Output covariance contributed by process and measurement noise
    /// over the horizon, i.e. everything in `𝚺` except the state term.
    pub fn noise_output_covariance(&self) -> DMatrix<f64> {
        let ct = &self.bold_c * &self.toeplitz_a;
        let cross = &ct * &self.bold_s;
        let mut sigma = &ct * &self.bold_q * ct.transpose() + &cross + cross.transpose() + &self.bold_r;
        linalg::symmetrize(&mut sigma);
        sigma
    }
}

/// Stacks a model and its noise over `horizon` steps.
pub fn build_lifted(model: &StateSpaceModel, noise: &NoiseModel, horizon: usize) -> Result<LiftedModel> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    noise.check_against(model)?;
    let (n_x, n_u, n_y) = (model.n_x(), model.n_u(), model.n_y());

    let mut powers = Vec::with_capacity(horizon);
    powers.push(DMatrix::<f64>::identity(n_x, n_x));
    for p in 1..horizon {
        let next = model.a() * &powers[p - 1];
        powers.push(next);
    }

    let mut bold_a = DMatrix::zeros(horizon * n_x, n_x);
    for (r, pow) in powers.iter().enumerate() {
        bold_a.view_mut((r * n_x, 0), (n_x, n_x)).copy_from(pow);
    }

    let mut toeplitz_a = DMatrix::zeros(horizon * n_x, horizon * n_x);
    for r in 1..horizon {
        for c in 0..r {
            toeplitz_a
                .view_mut((r * n_x, c * n_x), (n_x, n_x))
                .copy_from(&powers[r - c - 1]);
        }
    }

    Ok(LiftedModel {
        horizon,
        n_x,
        n_u,
        n_y,
        bold_a,
        bold_b: block_diag_repeat(horizon, model.b()),
        bold_c: block_diag_repeat(horizon, model.c()),
        toeplitz_a,
        bold_q: block_diag_repeat(horizon, noise.q()),
        bold_r: block_diag_repeat(horizon, noise.r()),
        bold_s: block_diag_repeat(horizon, noise.s()),
    })
}

/// Observer-based controller designed for the nominal model:
/// `ũ_k = −F x̂⁰_k + G u_k`, `x̂⁰_{k+1} = Ã⁰x̂⁰ + B̃⁰ũ + K(y − C̃⁰x̂⁰)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub feedback: DMatrix<f64>,
    pub feedforward: DMatrix<f64>,
    pub observer: DMatrix<f64>,
}

/// Closed-loop model of an open-loop candidate under the nominal
/// controller. The augmented state is `[x; x̂⁰]` and the new input is the
/// controller reference `u`.
pub fn close_loop(
    open_model: &StateSpaceModel,
    open_noise: &NoiseModel,
    nominal: &StateSpaceModel,
    gains: &ControllerGains,
) -> Result<(StateSpaceModel, NoiseModel)> {
    if !open_model.same_shape(nominal) {
        return Err(dims("candidate and nominal model shapes differ"));
    }
    open_noise.check_against(open_model)?;
    let (n_x, n_u, n_y) = (nominal.n_x(), nominal.n_u(), nominal.n_y());
    let f = &gains.feedback;
    let g = &gains.feedforward;
    let k = &gains.observer;
    if f.shape() != (n_u, n_x) || g.nrows() != n_u || k.shape() != (n_x, n_y) {
        return Err(dims("controller gains do not match the nominal model"));
    }

    let mut a = DMatrix::zeros(2 * n_x, 2 * n_x);
    a.view_mut((0, 0), (n_x, n_x)).copy_from(open_model.a());
    a.view_mut((0, n_x), (n_x, n_x)).copy_from(&(-(open_model.b() * f)));
    a.view_mut((n_x, 0), (n_x, n_x)).copy_from(&(k * open_model.c()));
    a.view_mut((n_x, n_x), (n_x, n_x))
        .copy_from(&(nominal.a() - nominal.b() * f - k * nominal.c()));

    let mut b = DMatrix::zeros(2 * n_x, g.ncols());
    b.view_mut((0, 0), (n_x, g.ncols())).copy_from(&(open_model.b() * g));
    b.view_mut((n_x, 0), (n_x, g.ncols())).copy_from(&(nominal.b() * g));

    let mut c = DMatrix::zeros(n_y, 2 * n_x);
    c.view_mut((0, 0), (n_y, n_x)).copy_from(open_model.c());

    let (qt, rt, st) = (open_noise.q(), open_noise.r(), open_noise.s());
    let mut q = DMatrix::zeros(2 * n_x, 2 * n_x);
    q.view_mut((0, 0), (n_x, n_x)).copy_from(qt);
    q.view_mut((0, n_x), (n_x, n_x)).copy_from(&(st * k.transpose()));
    q.view_mut((n_x, 0), (n_x, n_x)).copy_from(&(k * st.transpose()));
    q.view_mut((n_x, n_x), (n_x, n_x)).copy_from(&(k * rt * k.transpose()));
    linalg::symmetrize(&mut q);

    let mut s = DMatrix::zeros(2 * n_x, n_y);
    s.view_mut((0, 0), (n_x, n_y)).copy_from(st);
    s.view_mut((n_x, 0), (n_x, n_y)).copy_from(&(k * rt));

    Ok((StateSpaceModel::new(a, b, c)?, NoiseModel::new(q, rt.clone(), s)?))
}

/// State-feedback gain `F` placing the eigenvalues of `A − B F` at the
/// requested real poles.
///
/// With a square, well-conditioned `B` the gain `B⁻¹(A − diag(poles))`
/// is used, which yields a normal closed-loop matrix. Otherwise the input
/// is reduced to a single column `B v` and Ackermann's formula applied.
pub fn place_poles(a: &DMatrix<f64>, b: &DMatrix<f64>, poles: &[f64]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || poles.len() != n {
        return Err(dims("place_poles expects A n×n, B n×m and n poles"));
    }
    let m = b.ncols();
    if m == n {
        let svd = b.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax > 0.0 && smin > 1e-8 * smax {
            let target = DMatrix::from_diagonal(&DVector::from_column_slice(poles));
            let binv = b.clone().try_inverse().ok_or(Error::Uncontrollable)?;
            return Ok(binv * (a - target));
        }
    }

    // Candidate input directions: unit vectors, then the all-ones sum.
    let mut directions: Vec<DVector<f64>> = (0..m)
        .map(|j| {
            let mut v = DVector::zeros(m);
            v[j] = 1.0;
            v
        })
        .collect();
    directions.push(DVector::from_element(m, 1.0));

    let mut best: Option<(f64, DVector<f64>, DMatrix<f64>)> = None;
    for v in directions {
        let col = b * &v;
        let ctrb = controllability(a, &col);
        let svd = ctrb.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax == 0.0 {
            continue;
        }
        let rcond = smin / smax;
        if rcond > 1e-12 && best.as_ref().is_none_or(|(r, _, _)| rcond > *r) {
            best = Some((rcond, v, ctrb));
        }
    }
    let (_, v, ctrb) = best.ok_or(Error::Uncontrollable)?;

    // φ(A) for the desired characteristic polynomial Π (A − p I).
    let mut phi = DMatrix::<f64>::identity(n, n);
    for &p in poles {
        phi = phi * (a - DMatrix::<f64>::identity(n, n) * p);
    }
    let ctrb_inv = ctrb.try_inverse().ok_or(Error::Uncontrollable)?;
    let last_row = ctrb_inv.row(n - 1).into_owned();
    let f_row = last_row * phi;
    Ok(&v * f_row)
}

fn controllability(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut ctrb = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = a * col;
    }
    ctrb
}

/// Feedforward gain making the nominal closed-loop DC gain from the
/// reference `u` to `y` the identity: `G = [C (I − A + B F)⁻¹ B]⁻¹`.
pub fn dc_feedforward_gain(nominal: &StateSpaceModel, feedback: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = nominal.n_x();
    if feedback.shape() != (nominal.n_u(), n) {
        return Err(dims("feedback gain does not match the nominal model"));
    }
    if nominal.n_u() != nominal.n_y() {
        return Err(dims("DC inversion requires as many inputs as outputs"));
    }
    let loop_matrix = DMatrix::<f64>::identity(n, n) - nominal.a() + nominal.b() * feedback;
    let inv = loop_matrix.try_inverse().ok_or(Error::SingularDcGain)?;
    let dc = nominal.c() * inv * nominal.b();
    let g = dc.try_inverse().ok_or(Error::SingularDcGain)?;
    if !linalg::all_finite(&g) {
        return Err(Error::SingularDcGain);
    }
    Ok(g)
}

/// Steady-state one-step-predictor Kalman gain
/// `K = (A Ξ Cᵀ + S)(C Ξ Cᵀ + R)⁻¹` from Riccati fixed-point iteration.
pub fn steady_state_kalman_gain(model: &StateSpaceModel, noise: &NoiseModel) -> Result<DMatrix<f64>> {
    noise.check_against(model)?;
    let (a, c) = (model.a(), model.c());
    let mut xi = noise.q().clone();
    for _ in 0..100_000 {
        let innov = c * &xi * c.transpose() + noise.r();
        let chol = linalg::cholesky(&linalg::symmetrized(innov), "innovation covariance")?;
        let cross = a * &xi * c.transpose() + noise.s();
        let gain = chol.solve(&cross.transpose()).transpose();
        let mut next = a * &xi * a.transpose() + noise.q() - &gain * cross.transpose();
        linalg::symmetrize(&mut next);
        let diff = (&next - &xi).norm();
        xi = next;
        if !linalg::all_finite(&xi) {
            return Err(Error::NonFinite("Riccati iteration"));
        }
        if diff <= 1e-14 * (1.0 + xi.norm()) {
            return Ok(gain);
        }
    }
    Err(Error::NonFinite("Riccati iteration did not converge"))
}

/// Spectral radius of `A − B F`.
pub fn closed_loop_spectral_radius(model: &StateSpaceModel, feedback: &DMatrix<f64>) -> f64 {
    linalg::spectral_radius(&(model.a() - model.b() * feedback))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn real_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn rejects_bad_dimensions() {
        let r = StateSpaceModel::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1), DMatrix::zeros(1, 2));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        let r = StateSpaceModel::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1), DMatrix::zeros(1, 2));
        assert!(r.is_err());
        let r = NoiseModel::new(DMatrix::zeros(2, 2), DMatrix::identity(1, 1), DMatrix::zeros(1, 1));
        assert!(r.is_err());
        let r = NoiseModel::uncorrelated(DMatrix::zeros(2, 2), DMatrix::zeros(1, 1));
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn lifted_horizon_one() {
        let m = StateSpaceModel::new(scalar(0.7), scalar(1.0), scalar(1.0)).unwrap();
        let n = NoiseModel::uncorrelated(scalar(0.1), scalar(1.0)).unwrap();
        let l = build_lifted(&m, &n, 1).unwrap();
        assert_eq!(l.toeplitz_a, scalar(0.0));
        assert_eq!(l.bold_a, scalar(1.0));
    }

    #[test]
    fn lifted_horizon_two_blocks() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let m = StateSpaceModel::new(a.clone(), DMatrix::identity(2, 1), DMatrix::identity(1, 2)).unwrap();
        let n = NoiseModel::uncorrelated(DMatrix::identity(2, 2), scalar(1.0)).unwrap();
        let l = build_lifted(&m, &n, 2).unwrap();
        let mut t = DMatrix::zeros(4, 4);
        t.view_mut((2, 0), (2, 2)).copy_from(&DMatrix::identity(2, 2));
        assert_eq!(l.toeplitz_a, t);
        let mut ba = DMatrix::zeros(4, 2);
        ba.view_mut((0, 0), (2, 2)).copy_from(&DMatrix::identity(2, 2));
        ba.view_mut((2, 0), (2, 2)).copy_from(&a);
        assert_eq!(l.bold_a, ba);
    }

    #[test]
    fn lifted_scalar_toeplitz() {
        let m = StateSpaceModel::new(scalar(2.0), scalar(1.0), scalar(1.0)).unwrap();
        let n = NoiseModel::uncorrelated(scalar(0.0), scalar(1.0)).unwrap();
        let l = build_lifted(&m, &n, 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 1., 0., 0., 2., 1., 0.]);
        assert_eq!(l.toeplitz_a, expected);
        assert!(build_lifted(&m, &n, 0).is_err());
    }

    #[test]
    fn place_poles_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.3]));
        let f = place_poles(&a, &DMatrix::identity(2, 2), &[0.1, 0.2]).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.4, 0.1]));
        assert_relative_eq!(f, expected, epsilon = 1e-12);
    }

    #[test]
    fn place_poles_single_input_ackermann() {
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.4, -0.2, 0.9]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let f = place_poles(&a, &b, &[0.3, 0.6]).unwrap();
        let e = real_eigs(&(&a - &b * &f));
        assert_relative_eq!(e[0], 0.3, epsilon = 1e-8);
        assert_relative_eq!(e[1], 0.6, epsilon = 1e-8);
    }

    #[test]
    fn place_poles_multi_input_reduction() {
        // Rank-deficient square B forces the column-reduction path.
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.5, 0.0, 0.8]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let f = place_poles(&a, &b, &[0.2, 0.4]).unwrap();
        let e = real_eigs(&(&a - &b * &f));
        assert_relative_eq!(e[0], 0.2, epsilon = 1e-8);
        assert_relative_eq!(e[1], 0.4, epsilon = 1e-8);
    }

    #[test]
    fn place_poles_at_open_loop_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, 0.1, 0.3]);
        let eig = real_eigs(&a);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]);
        let f = place_poles(&a, &b, &eig).unwrap();
        let e = real_eigs(&(&a - &b * &f));
        assert_relative_eq!(e[0], eig[0], epsilon = 1e-8);
        assert_relative_eq!(e[1], eig[1], epsilon = 1e-8);
    }

    #[test]
    fn place_poles_uncontrollable() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.3]));
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(place_poles(&a, &b, &[0.1, 0.2]), Err(Error::Uncontrollable)));
    }

    #[test]
    fn dc_gain_scalar_cases() {
        let unit = StateSpaceModel::new(scalar(0.0), scalar(1.0), scalar(1.0)).unwrap();
        assert_relative_eq!(dc_feedforward_gain(&unit, &scalar(0.0)).unwrap()[(0, 0)], 1.0);
        let half = StateSpaceModel::new(scalar(0.5), scalar(1.0), scalar(1.0)).unwrap();
        assert_relative_eq!(dc_feedforward_gain(&half, &scalar(0.0)).unwrap()[(0, 0)], 0.5, epsilon = 1e-14);
        let integrator = StateSpaceModel::new(scalar(1.0), scalar(1.0), scalar(1.0)).unwrap();
        assert!(matches!(dc_feedforward_gain(&integrator, &scalar(0.0)), Err(Error::SingularDcGain)));
    }

    #[test]
    fn close_loop_zero_gains_is_block_diagonal() {
        let at = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.4]);
        let a0 = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.1, 0.2]);
        let bt = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        let ct = DMatrix::identity(2, 2);
        let cand = StateSpaceModel::new(at.clone(), bt.clone(), ct.clone()).unwrap();
        let nom = StateSpaceModel::new(a0.clone(), bt.clone(), ct).unwrap();
        let noise = NoiseModel::uncorrelated(DMatrix::identity(2, 2) * 0.1, DMatrix::identity(2, 2)).unwrap();
        let gains = ControllerGains {
            feedback: DMatrix::zeros(2, 2),
            feedforward: DMatrix::identity(2, 2),
            observer: DMatrix::zeros(2, 2),
        };
        let (m, n) = close_loop(&cand, &noise, &nom, &gains).unwrap();
        let mut a = DMatrix::zeros(4, 4);
        a.view_mut((0, 0), (2, 2)).copy_from(&at);
        a.view_mut((2, 2), (2, 2)).copy_from(&a0);
        assert_eq!(m.a(), &a);
        let mut q = DMatrix::zeros(4, 4);
        q.view_mut((0, 0), (2, 2)).copy_from(&(DMatrix::identity(2, 2) * 0.1));
        assert_eq!(n.q(), &q);
        assert_eq!(n.s(), &DMatrix::zeros(4, 2));
    }

    #[test]
    fn close_loop_separation_principle() {
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.3, -0.4, 0.8]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.7]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 1.0]);
        let nom = StateSpaceModel::new(a.clone(), b.clone(), c.clone()).unwrap();
        let noise = NoiseModel::uncorrelated(DMatrix::identity(2, 2) * 1e-2, DMatrix::identity(2, 2)).unwrap();
        let f = place_poles(&a, &b, &[0.5, 0.6]).unwrap();
        let k = steady_state_kalman_gain(&nom, &noise).unwrap();
        let g = dc_feedforward_gain(&nom, &f).unwrap();
        let gains = ControllerGains { feedback: f.clone(), feedforward: g, observer: k.clone() };
        let (m, _) = close_loop(&nom, &noise, &nom, &gains).unwrap();

        let mut expected: Vec<(f64, f64)> = (&a - &b * &f)
            .complex_eigenvalues()
            .iter()
            .chain((&a - &k * &c).complex_eigenvalues().iter())
            .map(|z| (z.re, z.im.abs()))
            .collect();
        let mut got: Vec<(f64, f64)> =
            m.a().complex_eigenvalues().iter().map(|z| (z.re, z.im.abs())).collect();
        expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (e, g) in expected.iter().zip(&got) {
            assert_relative_eq!(e.0, g.0, epsilon = 1e-8);
            assert_relative_eq!(e.1, g.1, epsilon = 1e-8);
        }
    }

    #[test]
    fn close_loop_noise_stays_psd_with_cross_term() {
        let at = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.4]);
        let bt = DMatrix::identity(2, 2);
        let ct = DMatrix::identity(2, 2);
        let m = StateSpaceModel::new(at, bt, ct).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[0.05, 0.0, 0.0, 0.02]);
        let noise = NoiseModel::new(DMatrix::identity(2, 2) * 0.1, DMatrix::identity(2, 2), s).unwrap();
        let gains = ControllerGains {
            feedback: DMatrix::identity(2, 2) * 0.1,
            feedforward: DMatrix::identity(2, 2),
            observer: DMatrix::identity(2, 2) * 0.3,
        };
        let (_, n) = close_loop(&m, &noise, &m, &gains).unwrap();
        assert!(linalg::min_eigenvalue(&n.joint()) > -1e-12);
    }
}
