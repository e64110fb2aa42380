//! Design objectives: quadratic forms and weighted sums of `exp(−quadratic)`.

use nalgebra::{DMatrix, DVector};

use crate::bhattacharyya::PairQuadratic;

/// `uᵀPu + qᵀu + r` with symmetric `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
}

impl QuadForm {
    pub fn zeros(dim: usize) -> Self {
        Self { p: DMatrix::zeros(dim, dim), q: DVector::zeros(dim), r: 0.0 }
    }

    /// The Bhattacharyya distance of a pair.
    pub fn distance(pq: &PairQuadratic) -> Self {
        Self { p: pq.h_mat.clone(), q: pq.c.clone(), r: pq.h }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.p * u)) + self.q.dot(u) + self.r
    }

    pub fn grad(&self, u: &DVector<f64>) -> DVector<f64> {
        2.0 * (&self.p * u) + &self.q
    }

    /// Values at every column of `v`.
    pub fn values_at(&self, v: &DMatrix<f64>) -> DVector<f64> {
        let pv = &self.p * v;
        let lin = v.transpose() * &self.q;
        DVector::from_fn(v.ncols(), |k, _| v.column(k).dot(&pv.column(k)) + lin[k] + self.r)
    }

    pub fn add_scaled(&mut self, other: &QuadForm, w: f64) {
        self.p += &other.p * w;
        self.q += &other.q * w;
        self.r += other.r * w;
    }

    fn is_flat(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|x| x.abs() <= 1e-300)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Quadratic(QuadForm),
    /// `Σ w_k exp(−f_k(u))`.
    CoefficientSum(Vec<(f64, QuadForm)>),
}

impl Objective {
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        match self {
            Objective::Quadratic(f) => f.value(u),
            Objective::CoefficientSum(terms) => terms.iter().map(|(w, f)| w * (-f.value(u)).exp()).sum(),
        }
    }

    pub fn grad(&self, u: &DVector<f64>) -> DVector<f64> {
        self.value_and_grad(u).1
    }

    pub fn value_and_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        match self {
            Objective::Quadratic(f) => (f.value(u), f.grad(u)),
            Objective::CoefficientSum(terms) => {
                let mut val = 0.0;
                let mut g = DVector::zeros(u.len());
                for (w, f) in terms {
                    let pu = &f.p * u;
                    let e = w * (-(u.dot(&pu) + f.q.dot(u) + f.r)).exp();
                    val += e;
                    if e != 0.0 {
                        g -= (2.0 * pu + &f.q) * e;
                    }
                }
                (val, g)
            }
        }
    }

    /// Values at every column of `v`.
    pub fn values_at(&self, v: &DMatrix<f64>) -> DVector<f64> {
        match self {
            Objective::Quadratic(f) => f.values_at(v),
            Objective::CoefficientSum(terms) => {
                let mut out = DVector::zeros(v.ncols());
                for (w, f) in terms {
                    out += f.values_at(v).map(|d| w * (-d).exp());
                }
                out
            }
        }
    }

    /// True when the objective does not depend on the input.
    pub fn is_flat(&self) -> bool {
        match self {
            Objective::Quadratic(f) => f.is_flat(),
            Objective::CoefficientSum(terms) => terms.iter().all(|(w, f)| *w == 0.0 || f.is_flat()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn form() -> QuadForm {
        QuadForm {
            p: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            q: DVector::from_vec(vec![0.3, -0.2]),
            r: 0.1,
        }
    }

    #[test]
    fn batch_values_match_pointwise() {
        let v = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 0.0, 2.0, 0.25, -1.0]);
        for obj in [Objective::Quadratic(form()), Objective::CoefficientSum(vec![(0.7, form()), (0.2, QuadForm::zeros(2))])] {
            let batch = obj.values_at(&v);
            for k in 0..3 {
                assert_relative_eq!(batch[k], obj.value(&v.column(k).into_owned()), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let obj = Objective::CoefficientSum(vec![(0.7, form()), (0.4, QuadForm { r: -0.3, ..form() })]);
        let u = DVector::from_vec(vec![0.2, -0.4]);
        let g = obj.grad(&u);
        for i in 0..2 {
            let mut e = DVector::zeros(2);
            e[i] = 1e-6;
            let fd = (obj.value(&(&u + &e)) - obj.value(&(&u - &e))) / 2e-6;
            assert_relative_eq!(g[i], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn flatness() {
        assert!(Objective::Quadratic(QuadForm { r: 3.0, ..QuadForm::zeros(2) }).is_flat());
        assert!(!Objective::Quadratic(form()).is_flat());
        assert!(Objective::CoefficientSum(vec![(0.0, form())]).is_flat());
    }
}
