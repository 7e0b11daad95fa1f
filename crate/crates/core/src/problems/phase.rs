//! Real phase retrieval with rank-r* ground truth:
//! `phi(M) = sum_i (a_i^T M a_i - y_i)^2`, `y_i = a_i^T M* a_i`.
//!
//! All factored oracles work with `A X` (m x r) and never build n x n matrices.

use super::ground_truth::GroundTruth;
use crate::error::{Error, Result};
use crate::objective::{ConvexCost, HessianOp, Smoothness};
use crate::rng::{gaussian_matrix, seeded, stream};
use crate::scalar::{lit, Real};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct PhaseRetrieval<T: Real> {
    /// Measurement vectors as rows (m x n).
    a: DMatrix<T>,
    y: DVector<T>,
    seed: u64,
    smoothness: Smoothness<T>,
}

/// Row-wise squared norms of an m x k block.
fn row_sq_norms<T: Real>(b: &DMatrix<T>) -> DVector<T> {
    DVector::from_fn(b.nrows(), |i, _| b.row(i).norm_squared())
}

/// Row-wise inner products of two m x k blocks.
fn row_dots<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DVector<T> {
    DVector::from_fn(a.nrows(), |i, _| a.row(i).dot(&b.row(i)))
}

fn scale_rows<T: Real>(b: &DMatrix<T>, w: &DVector<T>) -> DMatrix<T> {
    let mut out = b.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row.scale_mut(w[i]);
    }
    out
}

impl<T: Real> PhaseRetrieval<T> {
    pub fn new(a: DMatrix<T>, m_star: &DMatrix<T>, seed: u64) -> Result<Self> {
        let n = a.ncols();
        if m_star.shape() != (n, n) {
            return Err(Error::shape("phase retrieval target", (n, n), m_star.shape()));
        }
        let y = row_dots(&(&a * m_star), &a);
        let mut model = Self {
            a,
            y,
            seed,
            smoothness: Smoothness {
                lip_grad: T::zero(),
                lip_grad_estimated: true,
                lip_hess: Some(T::zero()),
                rsc_mu: None,
            },
        };
        model.smoothness.lip_grad = model.estimate_lip_grad(super::sensing::LIPSCHITZ_POWER_STEPS);
        Ok(model)
    }

    pub fn measurement_vectors(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn observations(&self) -> &DVector<T> {
        &self.y
    }

    /// `(a_i^T E a_i)_i`.
    fn measure(&self, e: &DMatrix<T>) -> DVector<T> {
        row_dots(&(&self.a * e), &self.a)
    }

    /// `sum_i w_i a_i a_i^T`.
    fn adjoint(&self, w: &DVector<T>) -> DMatrix<T> {
        self.a.tr_mul(&scale_rows(&self.a, w))
    }

    /// `2 lambda_max` of the measurement normal operator, by power iteration.
    fn estimate_lip_grad(&self, steps: usize) -> T {
        let n = self.a.ncols();
        let mut rng = seeded(self.seed, stream::POWER_ITERATION);
        let g: DMatrix<T> = gaussian_matrix(&mut rng, n, n);
        let mut e = &g + g.transpose();
        e.unscale_mut(e.norm());
        let mut lam = T::zero();
        for _ in 0..steps {
            let w = self.adjoint(&self.measure(&e));
            lam = e.dot(&w);
            let nrm = w.norm();
            if nrm == T::zero() {
                break;
            }
            e = w / nrm;
        }
        lam * lit(2.0)
    }
}

/// Phase retrieval with `m` standard Gaussian measurement vectors.
pub fn phase_retrieval_model<T: Real>(gt: &GroundTruth<T>, m: usize, seed: u64) -> Result<PhaseRetrieval<T>> {
    if m == 0 {
        return Err(Error::param("m", "need at least one measurement"));
    }
    let mut rng = seeded(seed, stream::PHASE);
    let a = gaussian_matrix(&mut rng, m, gt.n());
    PhaseRetrieval::new(a, &gt.m_star(), seed)
}

impl<T: Real> ConvexCost<T> for PhaseRetrieval<T> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn smoothness(&self) -> Smoothness<T> {
        self.smoothness
    }

    fn value(&self, m: &DMatrix<T>) -> T {
        (self.measure(m) - &self.y).norm_squared()
    }

    fn gradient(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let res = self.measure(m) - &self.y;
        self.adjoint(&res) * lit::<T>(2.0)
    }

    fn hessian_apply(&self, _m: &DMatrix<T>, e: &DMatrix<T>) -> Option<DMatrix<T>> {
        Some(self.adjoint(&self.measure(e)) * lit::<T>(2.0))
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn optimal_value(&self) -> Option<T> {
        Some(T::zero())
    }

    fn factored_value(&self, x: &DMatrix<T>) -> T {
        let ax = &self.a * x;
        (row_sq_norms(&ax) - &self.y).norm_squared()
    }

    fn factored_gradient(&self, x: &DMatrix<T>) -> DMatrix<T> {
        // 2 grad phi(XX^T) X = 4 A^T diag(res) (A X)
        let ax = &self.a * x;
        let res = row_sq_norms(&ax) - &self.y;
        self.a.tr_mul(&scale_rows(&ax, &res)) * lit::<T>(4.0)
    }

    fn factored_eval(&self, x: &DMatrix<T>) -> (T, DMatrix<T>) {
        let ax = &self.a * x;
        let res = row_sq_norms(&ax) - &self.y;
        let g = self.a.tr_mul(&scale_rows(&ax, &res)) * lit::<T>(4.0);
        (res.norm_squared(), g)
    }

    fn hessian_at<'a>(&'a self, x: &'a DMatrix<T>) -> Option<HessianOp<'a, T>> {
        let ax = &self.a * x;
        let res = row_sq_norms(&ax) - &self.y;
        let four = lit::<T>(4.0);
        let two = lit::<T>(2.0);
        Some(Box::new(move |v: &DMatrix<T>| {
            // 4 A^T [diag(res) A V + diag(2 <AX_i, AV_i>) A X]
            let av = &self.a * v;
            let cross = row_dots(&ax, &av) * two;
            let inner = scale_rows(&av, &res) + scale_rows(&ax, &cross);
            self.a.tr_mul(&inner) * four
        }))
    }

    fn name(&self) -> &str {
        "phase_retrieval"
    }
}
