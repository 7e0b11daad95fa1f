//! Linear matrix sensing `phi(M) = ||A(M) - b||^2` with `b = A(M*)`.

use super::ground_truth::GroundTruth;
use crate::error::{Error, Result};
use crate::objective::{ConvexCost, HessianOp, Smoothness};
use crate::rng::{gaussian, seeded, stream};
use crate::scalar::{lit, Real};
use nalgebra::{DMatrix, DVector};

/// Number of power-iteration steps used to estimate `lambda_max(A* A)`.
pub const LIPSCHITZ_POWER_STEPS: usize = 20;

/// `A(M) = (<A_1, M>, ..., <A_m, M>)`.
///
/// Only the symmetric parts `(A_i + A_i^T)/2` are stored, in packed
/// upper-triangular form with off-diagonal entries scaled by `sqrt(2)` so that
/// packed dot products equal Frobenius inner products. This halves memory and
/// leaves the operator unchanged on symmetric arguments; the adjoint always
/// returns a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOperator<T: Real> {
    n: usize,
    seed: u64,
    packed: DMatrix<T>,
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packed symmetric vectorization of `sym(M)`.
fn svec<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let n = m.nrows();
    let s2 = lit::<T>(std::f64::consts::SQRT_2);
    let half = lit::<T>(0.5);
    let mut out = DVector::zeros(packed_len(n));
    let mut idx = 0;
    for k in 0..n {
        for j in 0..k {
            out[idx] = (m[(j, k)] + m[(k, j)]) * half * s2;
            idx += 1;
        }
        out[idx] = m[(k, k)];
        idx += 1;
    }
    out
}

/// Inverse of [`svec`] onto symmetric matrices.
fn smat<T: Real>(v: &DVector<T>, n: usize) -> DMatrix<T> {
    let inv_s2 = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut out = DMatrix::zeros(n, n);
    let mut idx = 0;
    for k in 0..n {
        for j in 0..k {
            let val = v[idx] * inv_s2;
            out[(j, k)] = val;
            out[(k, j)] = val;
            idx += 1;
        }
        out[(k, k)] = v[idx];
        idx += 1;
    }
    out
}

impl<T: Real> SensingOperator<T> {
    /// `m` measurement matrices with i.i.d. standard Gaussian entries.
    pub fn gaussian(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::param("m", "need n >= 1 and m >= 1"));
        }
        let mut rng = seeded(seed, stream::SENSING);
        let mut packed = DMatrix::zeros(packed_len(n), m);
        let mut a = DMatrix::<T>::zeros(n, n);
        for i in 0..m {
            for row in 0..n {
                for col in 0..n {
                    a[(row, col)] = gaussian(&mut rng);
                }
            }
            packed.set_column(i, &svec(&a));
        }
        Ok(Self { n, seed, packed })
    }

    /// Entrywise observation `A(M) = vec(M)` (m = n^2), for which the
    /// stationary points of the factored problem are known in closed form.
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        let mut packed = DMatrix::zeros(packed_len(n), n * n);
        let mut e = DMatrix::<T>::zeros(n, n);
        for row in 0..n {
            for col in 0..n {
                e[(row, col)] = T::one();
                packed.set_column(row * n + col, &svec(&e));
                e[(row, col)] = T::zero();
            }
        }
        Ok(Self { n, seed: 0, packed })
    }

    /// Builds an operator from explicit measurement matrices.
    pub fn from_matrices(n: usize, seed: u64, mats: &[DMatrix<T>]) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::param("m", "need at least one measurement"));
        }
        let mut packed = DMatrix::zeros(packed_len(n), mats.len());
        for (i, a) in mats.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::shape("sensing matrix", (n, n), a.shape()));
            }
            packed.set_column(i, &svec(a));
        }
        Ok(Self { n, seed, packed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.packed.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Symmetric part of the i-th measurement matrix.
    pub fn matrix(&self, i: usize) -> DMatrix<T> {
        smat(&self.packed.column(i).into_owned(), self.n)
    }

    /// `A(M)`; `M` is symmetrized first.
    pub fn apply(&self, m: &DMatrix<T>) -> DVector<T> {
        self.packed.tr_mul(&svec(m))
    }

    /// `A*(y) = sum_i y_i sym(A_i)`.
    pub fn adjoint(&self, y: &DVector<T>) -> DMatrix<T> {
        smat(&(&self.packed * y), self.n)
    }

    /// `A*(A(E))`.
    pub fn normal_apply(&self, e: &DMatrix<T>) -> DMatrix<T> {
        self.adjoint(&self.apply(e))
    }

    /// Power-iteration estimate of `lambda_max(A* A)` over symmetric matrices.
    pub fn estimate_normal_max(&self, steps: usize, seed: u64) -> T {
        let mut rng = seeded(seed, stream::POWER_ITERATION);
        let g = DMatrix::<T>::from_fn(self.n, self.n, |_, _| gaussian(&mut rng));
        let mut e = &g + g.transpose();
        e.unscale_mut(e.norm());
        let mut lam = T::zero();
        for _ in 0..steps {
            let w = self.normal_apply(&e);
            lam = e.dot(&w);
            let nrm = w.norm();
            if nrm == T::zero() {
                break;
            }
            e = w / nrm;
        }
        lam
    }
}

/// Matrix sensing cost bound to a planted ground truth.
#[derive(Debug, Clone)]
pub struct MatrixSensing<T: Real> {
    op: SensingOperator<T>,
    b: DVector<T>,
    smoothness: Smoothness<T>,
}

impl<T: Real> MatrixSensing<T> {
    /// `phi(M) = ||A(M) - A(M*)||^2` with `L1 = 2 lambda_max(A* A)` estimated by
    /// [`LIPSCHITZ_POWER_STEPS`] power steps.
    pub fn new(op: SensingOperator<T>, m_star: &DMatrix<T>) -> Result<Self> {
        if m_star.shape() != (op.n(), op.n()) {
            return Err(Error::shape("matrix sensing target", (op.n(), op.n()), m_star.shape()));
        }
        let b = op.apply(m_star);
        let lam = op.estimate_normal_max(LIPSCHITZ_POWER_STEPS, op.seed());
        let smoothness = Smoothness {
            lip_grad: lam * lit(2.0),
            lip_grad_estimated: true,
            lip_hess: Some(T::zero()),
            rsc_mu: None,
        };
        Ok(Self { op, b, smoothness })
    }

    pub fn operator(&self) -> &SensingOperator<T> {
        &self.op
    }

    pub fn measurements(&self) -> &DVector<T> {
        &self.b
    }

    /// Attaches an externally estimated restricted strong convexity modulus.
    pub fn with_rsc_mu(mut self, mu: T) -> Self {
        self.smoothness.rsc_mu = Some(mu);
        self
    }
}

/// Matrix sensing model with `m` Gaussian measurements (`m = 3nr` by convention).
pub fn matrix_sensing_model<T: Real>(gt: &GroundTruth<T>, m: usize, seed: u64) -> Result<MatrixSensing<T>> {
    let op = SensingOperator::gaussian(gt.n(), m, seed)?;
    MatrixSensing::new(op, &gt.m_star())
}

/// Default measurement count `3 n r`.
pub fn default_measurements(n: usize, r: usize) -> usize {
    3 * n * r
}

impl<T: Real> ConvexCost<T> for MatrixSensing<T> {
    fn dim(&self) -> usize {
        self.op.n()
    }

    fn smoothness(&self) -> Smoothness<T> {
        self.smoothness
    }

    fn value(&self, m: &DMatrix<T>) -> T {
        (self.op.apply(m) - &self.b).norm_squared()
    }

    fn gradient(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let res = self.op.apply(m) - &self.b;
        self.op.adjoint(&res) * lit::<T>(2.0)
    }

    fn hessian_apply(&self, _m: &DMatrix<T>, e: &DMatrix<T>) -> Option<DMatrix<T>> {
        Some(self.op.normal_apply(e) * lit::<T>(2.0))
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn optimal_value(&self) -> Option<T> {
        Some(T::zero())
    }

    fn factored_eval(&self, x: &DMatrix<T>) -> (T, DMatrix<T>) {
        let res = self.op.apply(&(x * x.transpose())) - &self.b;
        let g = self.op.adjoint(&res) * x * lit::<T>(4.0);
        (res.norm_squared(), g)
    }

    /// Precomputes `sym(A_i) X` for every measurement, after which each
    /// Hessian-vector product costs O(m n r) instead of O(m n^2).
    fn hessian_at<'a>(&'a self, x: &'a DMatrix<T>) -> Option<HessianOp<'a, T>> {
        let (n, r) = x.shape();
        let m = self.op.m();
        let res = self.op.apply(&(x * x.transpose())) - &self.b;
        let grad_phi = self.op.adjoint(&res) * lit::<T>(2.0);
        let mut ax = DMatrix::<T>::zeros(n * r, m);
        for i in 0..m {
            let si_x = self.op.matrix(i) * x;
            ax.column_mut(i).copy_from_slice(si_x.as_slice());
        }
        let two = lit::<T>(2.0);
        let eight = lit::<T>(8.0);
        Some(Box::new(move |v: &DMatrix<T>| {
            // A(XV^T + VX^T)_i = 2 <S_i X, V>, and A*(y) X = sum_i y_i S_i X
            let vv = DVector::from_column_slice(v.as_slice());
            let y = ax.tr_mul(&vv);
            let back = &ax * y;
            let back = DMatrix::from_column_slice(n, r, back.as_slice());
            &grad_phi * v * two + back * eight
        }))
    }

    fn name(&self) -> &str {
        "matrix_sensing"
    }
}
