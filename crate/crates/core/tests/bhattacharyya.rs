//! Pair forms and the weighted bound against numerical integration and
//! finite differences.

mod common;

use clafd_core::concavity::{level, spectrum_of};
use clafd_core::{
    pair_quadratic_from_responses, spectrum, weighted_bound, weighted_bound_grad, BeliefState, FilterState,
    OutputResponse,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{gaussian_vector, random_pair, random_response};

fn gauss_pdf_2d(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let inv = cov.clone().try_inverse().unwrap();
    let d = y - mean;
    (-0.5 * d.dot(&(&inv * &d))).exp() / (2.0 * std::f64::consts::PI * cov.determinant().sqrt())
}

#[test]
fn distance_matches_quadrature_of_affinity() {
    // Oracle: −ln ∫√(p q) dy on a fine 2-D grid (midpoint rule).
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..4 {
        let ri = random_response(&mut rng, 2, 3, 0.8);
        let rj = random_response(&mut rng, 2, 3, 0.8);
        let pq = pair_quadratic_from_responses(&ri, &rj, (0, 1)).unwrap();
        let u = gaussian_vector(&mut rng, 3) * 0.5;
        let mi = &ri.free_mean + &ri.input_gain * &u;
        let mj = &rj.free_mean + &rj.input_gain * &u;
        let (lo, hi, n) = (-9.0, 9.0, 900);
        let step = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                let y = DVector::from_vec(vec![lo + (a as f64 + 0.5) * step, lo + (b as f64 + 0.5) * step]);
                acc += (gauss_pdf_2d(&y, &mi, &ri.sigma) * gauss_pdf_2d(&y, &mj, &rj.sigma)).sqrt();
            }
        }
        let oracle = -(acc * step * step).ln();
        assert!((pq.distance(&u) - oracle).abs() < 1e-6, "{} vs {}", pq.distance(&u), oracle);
    }
}

#[test]
fn identical_predictions_have_zero_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = random_response(&mut rng, 3, 2, 1.0);
    let pq = pair_quadratic_from_responses(&r, &r, (0, 1)).unwrap();
    assert!(pq.h.abs() < 1e-12 && pq.c.amax() == 0.0 && pq.h_mat.amax() == 0.0);
    assert!((pq.coefficient(&gaussian_vector(&mut rng, 2)) - 1.0).abs() < 1e-12);
}

#[test]
fn weighted_bound_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let resps: Vec<OutputResponse> = (0..4).map(|_| random_response(&mut rng, 2, 3, 0.6)).collect();
    let pairs = clafd_core::all_pairs(&resps).unwrap();
    let filters = vec![FilterState::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap(); 4];
    let b = BeliefState::new(&[0.1, 0.2, 0.3, 0.4], filters).unwrap();
    for _ in 0..10 {
        let u = gaussian_vector(&mut rng, 3);
        let g = weighted_bound_grad(&pairs, &b, &u);
        let eps = 1e-6;
        for k in 0..3 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[k] += eps;
            dn[k] -= eps;
            let fd = (weighted_bound(&pairs, &b, &up) - weighted_bound(&pairs, &b, &dn)) / (2.0 * eps);
            assert!((fd - g[k]).abs() < 1e-7 * (1.0 + fd.abs()), "component {k}: {fd} vs {}", g[k]);
        }
    }
}

#[test]
fn taylor_form_matches_second_order_expansion() {
    // Oracle: value, gradient and Hessian at zero from finite differences
    // of the exact coefficient.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pq = random_pair(&mut rng, 3, 2, 0.3, 0.5);
    let (p, q, r) = pq.taylor_form();
    let zero = DVector::zeros(3);
    assert!((r - pq.coefficient(&zero)).abs() < 1e-14);
    let g = pq.coefficient_grad(&zero);
    assert!((&q - &g).amax() < 1e-12);
    let eps = 1e-4;
    for i in 0..3 {
        for j in 0..3 {
            let e = |k: usize, s: f64| {
                let mut v = DVector::zeros(3);
                v[k] += s;
                v
            };
            let f = |v: DVector<f64>| pq.coefficient(&v);
            let hij = (f(e(i, eps) + e(j, eps)) - f(e(i, eps) - e(j, eps)) - f(e(j, eps) - e(i, eps))
                + f(-e(i, eps) - e(j, eps)))
                / (4.0 * eps * eps);
            assert!((2.0 * p[(i, j)] - hij).abs() < 1e-6, "({i},{j}): {} vs {hij}", 2.0 * p[(i, j)]);
        }
    }
}

fn hessian(pq: &clafd_core::PairQuadratic, u: &DVector<f64>) -> DMatrix<f64> {
    // ∇²𝔅 = 𝔅[(2Hu + c)(2Hu + c)ᵀ − 2H]
    let s = 2.0 * (&pq.h_mat * u) + &pq.c;
    (&s * s.transpose() - 2.0 * &pq.h_mat) * pq.coefficient(u)
}

#[test]
fn closed_form_hessian_matches_finite_differences_of_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let pq = random_pair(&mut rng, 4, 3, 0.4, 0.3);
        let u = gaussian_vector(&mut rng, 4) * 0.5;
        let h = hessian(&pq, &u);
        let eps = 1e-6;
        for k in 0..4 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[k] += eps;
            dn[k] -= eps;
            let col = (pq.coefficient_grad(&up) - pq.coefficient_grad(&dn)) / (2.0 * eps);
            assert!((col - h.column(k)).amax() < 1e-6);
        }
    }
}

#[test]
fn positive_curvature_direction_outside_level_set() {
    // With w = u + ½H⁺c and ρ² the level, v = U₁U₁ᵀw has
    // vᵀ∇²𝔅v = 2𝔅ρ²(2ρ² − 1), positive exactly when ρ² > ½.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let pq = random_pair(&mut rng, 5, 3, 0.5, 0.8);
        let spec = spectrum(&pq, 1e-10);
        let u = gaussian_vector(&mut rng, 5);
        let rho2 = level(&pq, &spec, &u);
        let hp = common::pinv(&pq.h_mat);
        let w = &u + 0.5 * (&hp * &pq.c);
        let v = &spec.u1 * (spec.u1.transpose() * &w);
        let curv = v.dot(&(hessian(&pq, &u) * &v));
        let expected = 2.0 * pq.coefficient(&u) * rho2 * (2.0 * rho2 - 1.0);
        assert!((curv - expected).abs() < 1e-9 * (1.0 + expected.abs()), "{curv} vs {expected}");
    }
}

#[test]
fn level_uses_the_range_pseudo_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pq = random_pair(&mut rng, 6, 2, 1.0, 1.0);
    let spec = spectrum_of(&pq.h_mat, 1e-10);
    assert_eq!(spec.rank(), 2);
    let hp = common::pinv(&pq.h_mat);
    assert!((spec.kappa(&pq.c) - 0.25 * pq.c.dot(&(&hp * &pq.c))).abs() < 1e-10);
}
