//! Feasible input sets over the design horizon.
//!
//! Stacked inputs are laid out time-major: entry `ℓ·n_u + ch` is channel
//! `ch` at step `ℓ` of the horizon.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{dims, Error, Result};

/// Default cap on the number of polytope vertices enumerated.
pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;

const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// `‖u_ℓ‖∞ ≤ amp_bound`, `‖u_ℓ − u_{ℓ−1}‖∞ ≤ rate_bound`, with `u_prev`
    /// the last applied input.
    BoxRate { amp_bound: f64, rate_bound: f64, u_prev: DVector<f64> },
    /// `‖u_ℓ − center‖₂² ≤ energy_bound` for every step.
    EnergyBall { energy_bound: f64, center: DVector<f64> },
}

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub kind: ConstraintKind,
    pub horizon: usize,
    pub n_u: usize,
    channel_cache: OnceLock<Vec<Vec<Vec<f64>>>>,
}

impl ConstraintSet {
    pub fn box_rate(amp_bound: f64, rate_bound: f64, u_prev: DVector<f64>, horizon: usize) -> Result<Self> {
        if !(amp_bound > 0.0 && rate_bound > 0.0) {
            return Err(Error::InvalidConfig("amplitude and rate bounds must be positive".into()));
        }
        if u_prev.iter().any(|v| v.abs() > amp_bound + FEAS_TOL) {
            return Err(Error::InvalidConfig("previous input violates the amplitude bound".into()));
        }
        Self::build(ConstraintKind::BoxRate { amp_bound, rate_bound, u_prev }, horizon)
    }

    pub fn energy_ball(energy_bound: f64, center: DVector<f64>, horizon: usize) -> Result<Self> {
        if !(energy_bound > 0.0) {
            return Err(Error::InvalidConfig("energy bound must be positive".into()));
        }
        Self::build(ConstraintKind::EnergyBall { energy_bound, center }, horizon)
    }

    fn build(kind: ConstraintKind, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        let n_u = match &kind {
            ConstraintKind::BoxRate { u_prev, .. } => u_prev.len(),
            ConstraintKind::EnergyBall { center, .. } => center.len(),
        };
        if n_u == 0 {
            return Err(dims("constraint set needs at least one input channel"));
        }
        Ok(Self { kind, horizon, n_u, channel_cache: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.horizon * self.n_u
    }

    pub fn is_polytope(&self) -> bool {
        matches!(self.kind, ConstraintKind::BoxRate { .. })
    }

    /// Same constraint shape over a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::build(self.kind.clone(), horizon)
    }

    /// The set for the next step after `applied` has been used.
    pub fn advanced(&self, applied: &DVector<f64>) -> Self {
        match &self.kind {
            ConstraintKind::BoxRate { amp_bound, rate_bound, .. } => Self {
                kind: ConstraintKind::BoxRate {
                    amp_bound: *amp_bound,
                    rate_bound: *rate_bound,
                    u_prev: applied.clone(),
                },
                horizon: self.horizon,
                n_u: self.n_u,
                channel_cache: OnceLock::new(),
            },
            ConstraintKind::EnergyBall { .. } => self.clone(),
        }
    }

    /// Per-step center of the ball, or zero for the polytope.
    pub fn center_sequence(&self) -> DVector<f64> {
        match &self.kind {
            ConstraintKind::EnergyBall { center, .. } => tile(center, self.horizon),
            ConstraintKind::BoxRate { .. } => DVector::zeros(self.dim()),
        }
    }

    /// Feasible point used when the objective does not depend on the input:
    /// the ball center, or the origin clipped into the polytope.
    pub fn neutral_point(&self) -> DVector<f64> {
        self.project(&self.center_sequence())
    }

    /// Largest constraint violation at `u` (zero when feasible).
    pub fn violation(&self, u: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        match &self.kind {
            ConstraintKind::BoxRate { amp_bound, rate_bound, u_prev } => {
                for l in 0..self.horizon {
                    for ch in 0..self.n_u {
                        let v = u[l * self.n_u + ch];
                        let prev = if l == 0 { u_prev[ch] } else { u[(l - 1) * self.n_u + ch] };
                        worst = worst.max(v.abs() - amp_bound).max((v - prev).abs() - rate_bound);
                    }
                }
            }
            ConstraintKind::EnergyBall { energy_bound, center } => {
                for l in 0..self.horizon {
                    let step = u.rows(l * self.n_u, self.n_u) - center;
                    worst = worst.max(step.norm_squared() - energy_bound);
                }
            }
        }
        worst
    }

    pub fn is_feasible(&self, u: &DVector<f64>, tol: f64) -> bool {
        u.len() == self.dim() && self.violation(u) <= tol
    }

    /// Maps `u` into the set: radial scaling per step for balls, and a
    /// forward clipping sweep per channel for the box-rate polytope.
    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = u.clone();
        match &self.kind {
            ConstraintKind::BoxRate { amp_bound, rate_bound, u_prev } => {
                for ch in 0..self.n_u {
                    let mut prev = u_prev[ch];
                    for l in 0..self.horizon {
                        let i = l * self.n_u + ch;
                        let lo = (-amp_bound).max(prev - rate_bound);
                        let hi = amp_bound.min(prev + rate_bound);
                        out[i] = out[i].clamp(lo, hi);
                        prev = out[i];
                    }
                }
            }
            ConstraintKind::EnergyBall { energy_bound, center } => {
                let radius = energy_bound.sqrt();
                for l in 0..self.horizon {
                    let mut step = out.rows(l * self.n_u, self.n_u) - center;
                    let norm = step.norm();
                    if norm > radius {
                        step *= radius / norm;
                    }
                    out.rows_mut(l * self.n_u, self.n_u).copy_from(&(step + center));
                }
            }
        }
        out
    }

    /// Minimizer of `⟨grad, u⟩` over the set. Components with a zero
    /// gradient keep their value from `current`.
    pub fn linear_minimizer(&self, grad: &DVector<f64>, current: &DVector<f64>) -> DVector<f64> {
        let mut out = current.clone();
        match &self.kind {
            ConstraintKind::EnergyBall { energy_bound, center } => {
                let radius = energy_bound.sqrt();
                for l in 0..self.horizon {
                    let g = grad.rows(l * self.n_u, self.n_u);
                    let norm = g.norm();
                    if norm > 0.0 {
                        let step = center - g * (radius / norm);
                        out.rows_mut(l * self.n_u, self.n_u).copy_from(&step);
                    }
                }
            }
            ConstraintKind::BoxRate { .. } => {
                let channels = self.channel_vertices();
                for (ch, verts) in channels.iter().enumerate() {
                    let g: Vec<f64> = (0..self.horizon).map(|l| grad[l * self.n_u + ch]).collect();
                    if g.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let mut best = f64::INFINITY;
                    let mut best_idx = 0;
                    for (k, v) in verts.iter().enumerate() {
                        let val: f64 = v.iter().zip(&g).map(|(a, b)| a * b).sum();
                        if val < best {
                            best = val;
                            best_idx = k;
                        }
                    }
                    for (l, x) in verts[best_idx].iter().enumerate() {
                        out[l * self.n_u + ch] = *x;
                    }
                }
            }
        }
        out
    }

    /// A random feasible point.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match &self.kind {
            ConstraintKind::EnergyBall { energy_bound, center } => {
                let radius = energy_bound.sqrt();
                let mut out = DVector::zeros(self.dim());
                for l in 0..self.horizon {
                    let mut dir = DVector::from_fn(self.n_u, |_, _| StandardNormal.sample(rng));
                    let n = dir.norm();
                    if n > 0.0 {
                        dir /= n;
                    }
                    let r = radius * rng.random::<f64>().powf(1.0 / self.n_u as f64);
                    out.rows_mut(l * self.n_u, self.n_u).copy_from(&(center + dir * r));
                }
                out
            }
            ConstraintKind::BoxRate { amp_bound, rate_bound, u_prev } => {
                let mut out = DVector::zeros(self.dim());
                for ch in 0..self.n_u {
                    let mut prev = u_prev[ch];
                    for l in 0..self.horizon {
                        let lo = (-amp_bound).max(prev - rate_bound);
                        let hi = amp_bound.min(prev + rate_bound);
                        let v = lo + (hi - lo) * rng.random::<f64>();
                        out[l * self.n_u + ch] = v;
                        prev = v;
                    }
                }
                out
            }
        }
    }

    /// Vertices of each scalar channel's chain polytope, lexicographically sorted.
    pub(crate) fn channel_vertices(&self) -> &Vec<Vec<Vec<f64>>> {
        self.channel_cache.get_or_init(|| match &self.kind {
            ConstraintKind::BoxRate { amp_bound, rate_bound, u_prev } => u_prev
                .iter()
                .map(|p| chain_vertices(self.horizon, *amp_bound, *rate_bound, *p))
                .collect(),
            ConstraintKind::EnergyBall { .. } => Vec::new(),
        })
    }
}

pub(crate) fn tile(block: &DVector<f64>, times: usize) -> DVector<f64> {
    let n = block.len();
    DVector::from_fn(n * times, |i, _| block[i % n])
}

/// Vertices of `{x ∈ ℝᴺ : |x_ℓ| ≤ amp, |x_ℓ − x_{ℓ−1}| ≤ rate, x_0 ≡ prev}`.
///
/// A vertex has `N` linearly independent active constraints. On this chain
/// they split the steps into consecutive segments, each pinned by one
/// unary bound (amplitude, or the rate bound to `prev` for the first step)
/// and linked internally by active rate constraints.
pub(crate) fn chain_vertices(n: usize, amp: f64, rate: f64, prev: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut buf = vec![0.0; n];
    segments(0, n, amp, rate, prev, &mut buf, &mut out);
    out.sort_by(|a, b| lex_cmp(a, b));
    out.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + amp)));
    out
}

fn segments(start: usize, n: usize, amp: f64, rate: f64, prev: f64, buf: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if start == n {
        out.push(buf.clone());
        return;
    }
    let tol = FEAS_TOL * (1.0 + amp);
    for end in (start + 1)..=n {
        let len = end - start;
        for anchor in start..end {
            let mut anchors = vec![amp, -amp];
            if anchor == 0 {
                anchors.push(prev + rate);
                anchors.push(prev - rate);
            }
            for &value in &anchors {
                for signs in 0..(1u64 << (len - 1)) {
                    buf[anchor] = value;
                    let mut bit = 0;
                    for q in (anchor + 1)..end {
                        let s = if signs >> bit & 1 == 0 { 1.0 } else { -1.0 };
                        buf[q] = buf[q - 1] + s * rate;
                        bit += 1;
                    }
                    for q in (start..anchor).rev() {
                        let s = if signs >> bit & 1 == 0 { 1.0 } else { -1.0 };
                        buf[q] = buf[q + 1] + s * rate;
                        bit += 1;
                    }
                    let within_box = buf[start..end].iter().all(|v| v.abs() <= amp + tol);
                    let before = if start == 0 { prev } else { buf[start - 1] };
                    if within_box && (buf[start] - before).abs() <= rate + tol {
                        segments(end, n, amp, rate, prev, buf, out);
                    }
                }
            }
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// All vertices of a box-rate polytope, as columns of a matrix in
/// lexicographic order of the stacked input.
pub fn vertex_matrix(cs: &ConstraintSet, cap: usize) -> Result<DMatrix<f64>> {
    if !cs.is_polytope() {
        return Err(Error::InvalidConfig("vertex enumeration needs a box-rate polytope".into()));
    }
    let channels = cs.channel_vertices();
    let count = channels.iter().try_fold(1usize, |acc, v| acc.checked_mul(v.len())).unwrap_or(usize::MAX);
    if count > cap {
        return Err(Error::VertexCapExceeded { count, cap });
    }
    let (n, n_u) = (cs.horizon, cs.n_u);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut idx = vec![0usize; n_u];
    loop {
        let mut v = vec![0.0; n * n_u];
        for ch in 0..n_u {
            for (l, x) in channels[ch][idx[ch]].iter().enumerate() {
                v[l * n_u + ch] = *x;
            }
        }
        cols.push(v);
        // Odometer over channels.
        let mut ch = n_u;
        loop {
            if ch == 0 {
                cols.sort_by(|a, b| lex_cmp(a, b));
                let mut m = DMatrix::zeros(n * n_u, cols.len());
                for (k, c) in cols.iter().enumerate() {
                    m.set_column(k, &DVector::from_column_slice(c));
                }
                return Ok(m);
            }
            ch -= 1;
            idx[ch] += 1;
            if idx[ch] < channels[ch].len() {
                break;
            }
            idx[ch] = 0;
        }
    }
}

/// Exact vertex set of a box-rate polytope.
pub fn enumerate_vertices(cs: &ConstraintSet, cap: usize) -> Result<Vec<DVector<f64>>> {
    let m = vertex_matrix(cs, cap)?;
    Ok(m.column_iter().map(|c| c.into_owned()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_set(n: usize, prev: f64) -> ConstraintSet {
        ConstraintSet::box_rate(2.0, 1.0, DVector::from_element(1, prev), n).unwrap()
    }

    fn values(cs: &ConstraintSet) -> Vec<Vec<f64>> {
        enumerate_vertices(cs, DEFAULT_VERTEX_CAP).unwrap().iter().map(|v| v.iter().copied().collect()).collect()
    }

    #[test]
    fn single_step_vertices() {
        assert_eq!(values(&scalar_set(1, 0.0)), vec![vec![-1.0], vec![1.0]]);
        assert_eq!(values(&scalar_set(1, 2.0)), vec![vec![1.0], vec![2.0]]);
    }

    #[test]
    fn backward_pinned_vertex_is_found() {
        // u₂ = 2 at the box with u₂ − u₁ = 1 active pins u₁ = 1, which is
        // interior to u₁'s own bounds [−0.5, 1.5].
        let v = values(&scalar_set(2, 0.5));
        assert!(v.contains(&vec![1.0, 2.0]));
    }

    #[test]
    fn cap_is_enforced() {
        let cs = ConstraintSet::box_rate(2.0, 1.0, DVector::zeros(2), 5).unwrap();
        assert!(matches!(vertex_matrix(&cs, 10), Err(Error::VertexCapExceeded { .. })));
    }

    #[test]
    fn product_vertices_are_feasible_and_sorted() {
        let cs = ConstraintSet::box_rate(2.0, 1.0, DVector::from_vec(vec![0.0, 1.0]), 3).unwrap();
        let vs = enumerate_vertices(&cs, DEFAULT_VERTEX_CAP).unwrap();
        let per: Vec<usize> = cs.channel_vertices().iter().map(Vec::len).collect();
        assert_eq!(vs.len(), per[0] * per[1]);
        for w in vs.windows(2) {
            assert_eq!(lex_cmp(w[0].as_slice(), w[1].as_slice()), std::cmp::Ordering::Less);
        }
        assert!(vs.iter().all(|v| cs.is_feasible(v, 1e-12)));
    }

    #[test]
    fn projection_and_random_points_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let poly = ConstraintSet::box_rate(2.0, 1.0, DVector::from_vec(vec![1.5, -2.0]), 4).unwrap();
        let ball = ConstraintSet::energy_ball(2.0, DVector::from_vec(vec![3.0, 5.0]), 4).unwrap();
        for cs in [&poly, &ball] {
            for _ in 0..100 {
                let wild = DVector::from_fn(cs.dim(), |_, _| 10.0 * (rng.random::<f64>() - 0.5));
                assert!(cs.is_feasible(&cs.project(&wild), 1e-12));
                assert!(cs.is_feasible(&cs.random_point(&mut rng), 1e-12));
            }
            assert!(cs.is_feasible(&cs.neutral_point(), 1e-12));
        }
        assert_eq!(ball.neutral_point(), tile(&DVector::from_vec(vec![3.0, 5.0]), 4));
    }

    #[test]
    fn linear_minimizer_ball_closed_form() {
        let ball = ConstraintSet::energy_ball(4.0, DVector::zeros(2), 2).unwrap();
        let g = DVector::from_vec(vec![3.0, 4.0, 0.0, 0.0]);
        let cur = DVector::from_vec(vec![0.0, 0.0, 0.5, 0.5]);
        let s = ball.linear_minimizer(&g, &cur);
        assert!((s - DVector::from_vec(vec![-1.2, -1.6, 0.5, 0.5])).amax() < 1e-15);
    }
}
