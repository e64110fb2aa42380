//! Receding-horizon input design for model discrimination.
//!
//! Every design minimizes an objective over the stacked horizon input and
//! returns the whole sequence; only its first block is applied.

mod constraints;
mod objective;
mod open_loop;
mod solvers;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use constraints::{enumerate_vertices, vertex_matrix, ConstraintKind, ConstraintSet, DEFAULT_VERTEX_CAP};
pub use objective::{Objective, QuadForm};
pub use open_loop::{design_ol, OlPlan};
pub use solvers::{fw_concave_min, projected_gradient, FwOutcome};

use crate::bayes::BeliefState;
use crate::bhattacharyya::{all_pairs, PairQuadratic};
use crate::concavity::{self, Concavity, DEFAULT_RANK_TOL};
use crate::error::{dims, Result};
use crate::estimation::OutputResponse;

/// Tri-state concavity certificate of a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Yes,
    No,
    NotApplicable,
}

impl From<Concavity> for Certificate {
    fn from(c: Concavity) -> Self {
        if c.is_concave() {
            Certificate::Yes
        } else {
            Certificate::No
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub u_seq: DVector<f64>,
    pub first_input: DVector<f64>,
    pub objective_value: f64,
    pub certified_concave: Certificate,
    /// Vertices evaluated (polytopes) or accepted solver iterations (balls).
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    pub vertex_cap: usize,
    pub rank_tol: f64,
    /// Random feasible starts added for ball-constrained designs.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { vertex_cap: DEFAULT_VERTEX_CAP, rank_tol: DEFAULT_RANK_TOL, random_starts: 3, seed: 0 }
    }
}

/// Maximizes the summed Bhattacharyya distance over all pairs.
pub fn design_bd(pairs: &[PairQuadratic], cs: &ConstraintSet, opts: &DesignOptions) -> Result<DesignResult> {
    check_dims(pairs.iter(), cs)?;
    let mut f = QuadForm::zeros(cs.dim());
    for pq in pairs {
        f.add_scaled(&QuadForm::distance(pq), -1.0);
    }
    let hints = direction_hints(pairs.iter(), cs);
    let (u, value, iterations) = minimize(&Objective::Quadratic(f), cs, &hints, &[], opts)?;
    Ok(result(u, value, Certificate::NotApplicable, iterations, cs))
}

/// Minimizes the weighted second-order expansion of the bound at `u = 0`.
pub fn design_qta(
    pairs: &[PairQuadratic],
    b: &BeliefState,
    cs: &ConstraintSet,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    check_dims(pairs.iter(), cs)?;
    let mut f = QuadForm::zeros(cs.dim());
    for pq in pairs {
        let w = b.pair_weight(pq.pair.0, pq.pair.1);
        if w > 0.0 {
            let (p, q, r) = pq.taylor_form();
            f.add_scaled(&QuadForm { p, q, r }, w);
        }
    }
    let extra: Vec<DVector<f64>> = stationary_point(&f).into_iter().collect();
    let hints = direction_hints(pairs.iter(), cs);
    let (u, value, iterations) = minimize(&Objective::Quadratic(f), cs, &hints, &extra, opts)?;
    Ok(result(u, value, Certificate::NotApplicable, iterations, cs))
}

/// Minimizes the weighted Bhattacharyya bound at the end of the horizon.
pub fn design_bc(
    pairs: &[PairQuadratic],
    b: &BeliefState,
    cs: &ConstraintSet,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    design_bound(&[pairs.to_vec()], b, cs, opts)
}

/// Minimizes the bound summed over nested output horizons.
pub fn design_sbc(
    prefix_pairs: &[Vec<PairQuadratic>],
    b: &BeliefState,
    cs: &ConstraintSet,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    design_bound(prefix_pairs, b, cs, opts)
}

fn design_bound(
    groups: &[Vec<PairQuadratic>],
    b: &BeliefState,
    cs: &ConstraintSet,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    check_dims(groups.iter().flatten(), cs)?;
    let active: Vec<(f64, &PairQuadratic)> = groups
        .iter()
        .flatten()
        .map(|pq| (b.pair_weight(pq.pair.0, pq.pair.1), pq))
        .filter(|(w, _)| *w > 0.0)
        .collect();
    let terms = active.iter().map(|(w, pq)| (*w, QuadForm::distance(pq))).collect();
    let obj = Objective::CoefficientSum(terms);
    let hints = direction_hints(active.iter().map(|(_, pq)| *pq), cs);
    let (u, value, iterations) = minimize(&obj, cs, &hints, &[], opts)?;
    let cert = certify(active.iter().map(|(_, pq)| *pq), cs, opts)?;
    Ok(result(u, value, cert, iterations, cs))
}

/// Concavity certificate of the bound over `cs`, every pair checked.
pub fn certify<'a>(
    pairs: impl Iterator<Item = &'a PairQuadratic>,
    cs: &ConstraintSet,
    opts: &DesignOptions,
) -> Result<Certificate> {
    let mut verdict = Concavity::Concave;
    let vertices = if cs.is_polytope() { Some(vertex_matrix(cs, opts.vertex_cap)?) } else { None };
    for pq in pairs {
        let spec = concavity::spectrum(pq, opts.rank_tol);
        let v = match (&cs.kind, &vertices) {
            (_, Some(vm)) => {
                if !spec.supports(&pq.c) {
                    Concavity::Uncertified
                } else {
                    let kappa = spec.kappa(&pq.c);
                    let d = QuadForm::distance(pq).values_at(vm);
                    if d.iter().all(|di| di - pq.h + kappa <= 0.5) {
                        Concavity::Concave
                    } else {
                        Concavity::NotConcave
                    }
                }
            }
            (ConstraintKind::EnergyBall { energy_bound, center }, None) => {
                let shifted = pq.translated(&constraints::tile(center, cs.horizon));
                concavity::check_energy_ball(&shifted, &spec, *energy_bound, cs.horizon)
            }
            (ConstraintKind::BoxRate { .. }, None) => unreachable!("polytopes carry vertices"),
        };
        verdict = verdict.and(v);
        if verdict == Concavity::Uncertified {
            break;
        }
    }
    Ok(verdict.into())
}

/// Pair forms for the nested output horizons `2..=N` (or `{1}` when `N = 1`),
/// all over the full stacked input.
pub fn prefix_pairs(responses: &[OutputResponse], n_y: usize, horizon: usize) -> Result<Vec<Vec<PairQuadratic>>> {
    let lengths: Vec<usize> = if horizon == 1 { vec![1] } else { (2..=horizon).collect() };
    lengths
        .into_iter()
        .map(|l| {
            let cut: Vec<OutputResponse> = responses.iter().map(|r| r.prefix(l, n_y)).collect();
            all_pairs(&cut)
        })
        .collect()
}

fn check_dims<'a>(mut pairs: impl Iterator<Item = &'a PairQuadratic>, cs: &ConstraintSet) -> Result<()> {
    if pairs.any(|pq| pq.dim() != cs.dim()) {
        return Err(dims("pair form does not match the constraint set dimension"));
    }
    Ok(())
}

fn result(u: DVector<f64>, value: f64, cert: Certificate, iterations: usize, cs: &ConstraintSet) -> DesignResult {
    let first_input = u.rows(0, cs.n_u).into_owned();
    DesignResult { u_seq: u, first_input, objective_value: value, certified_concave: cert, iterations }
}

/// Minimizer of a quadratic with PSD `P`, when one exists.
fn stationary_point(f: &QuadForm) -> Option<DVector<f64>> {
    let eig = SymmetricEigen::new(f.p.clone());
    let scale = eig.eigenvalues.amax().max(f.q.amax());
    if scale == 0.0 || eig.eigenvalues.min() < -1e-12 * scale {
        return None;
    }
    let cut = 1e-12 * scale;
    let mut u = DVector::zeros(f.dim());
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        if *l > cut {
            let v = eig.eigenvectors.column(k);
            u -= v * (0.5 * v.dot(&f.q) / l);
        }
    }
    (f.grad(&u).norm() <= 1e-9 * (1.0 + f.q.norm())).then_some(u)
}

/// Boundary points of the ball along each pair's linear term (in centered
/// coordinates), or along the top eigenvector of `H` when that term vanishes.
fn direction_hints<'a>(pairs: impl Iterator<Item = &'a PairQuadratic>, cs: &ConstraintSet) -> Vec<DVector<f64>> {
    let ConstraintKind::EnergyBall { energy_bound, .. } = &cs.kind else {
        return Vec::new();
    };
    let center = cs.center_sequence();
    let radius = energy_bound.sqrt();
    let mut hints = Vec::new();
    for pq in pairs {
        let slope = &pq.c + 2.0 * (&pq.h_mat * &center);
        let dir = if slope.norm() > 1e-12 * (1.0 + pq.h_mat.amax()) {
            slope
        } else {
            let eig = SymmetricEigen::new(pq.h_mat.clone());
            let k = eig.eigenvalues.imax();
            if eig.eigenvalues[k] <= 0.0 {
                continue;
            }
            eig.eigenvectors.column(k).into_owned()
        };
        for sign in [1.0, -1.0] {
            let mut p = center.clone();
            for l in 0..cs.horizon {
                let blk = dir.rows(l * cs.n_u, cs.n_u);
                let n = blk.norm();
                if n > 0.0 {
                    let step = blk * (sign * radius / n);
                    let mut dst = p.rows_mut(l * cs.n_u, cs.n_u);
                    dst += step;
                }
            }
            hints.push(p);
        }
    }
    hints
}

/// Shared solver dispatch. Flat objectives return the neutral point;
/// polytopes are searched exhaustively over their vertices (plus `extra`
/// feasible candidates); balls use multi-start linearize-and-minimize.
fn minimize(
    obj: &Objective,
    cs: &ConstraintSet,
    hints: &[DVector<f64>],
    extra: &[DVector<f64>],
    opts: &DesignOptions,
) -> Result<(DVector<f64>, f64, usize)> {
    if obj.is_flat() {
        let u = cs.neutral_point();
        let v = obj.value(&u);
        return Ok((u, v, 0));
    }
    let feasible_extra = extra.iter().filter(|e| cs.is_feasible(e, 1e-12));
    if cs.is_polytope() {
        let vm = vertex_matrix(cs, opts.vertex_cap)?;
        let values = obj.values_at(&vm);
        let (u, v) = pick_lowest(&vm, &values);
        let mut best = (u, v);
        for e in feasible_extra {
            let ve = obj.value(e);
            if ve < best.1 {
                best = (e.clone(), ve);
            }
        }
        return Ok((best.0, best.1, vm.ncols()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<DVector<f64>> = feasible_extra.cloned().collect();
    starts.push(cs.neutral_point());
    starts.extend(hints.iter().cloned());
    starts.extend((0..opts.random_starts).map(|_| cs.random_point(&mut rng)));
    let out = fw_concave_min(|u| obj.value(u), |u| obj.grad(u), cs, &starts)?;
    Ok((out.u, out.value, out.iterations))
}

/// Lowest value over the columns of `vm`; near-ties (relative 1e-12) go to
/// the lexicographically smallest column, which is the earliest one.
fn pick_lowest(vm: &DMatrix<f64>, values: &DVector<f64>) -> (DVector<f64>, f64) {
    let min = values.min();
    let tol = 1e-12 * min.abs().max(1e-300);
    let k = values.iter().position(|v| *v <= min + tol).expect("non-empty vertex set");
    (vm.column(k).into_owned(), values[k])
}
