//! The factored objective `f(X) = phi(X X^T)`, its derivatives, and the
//! local norms induced by the preconditioner `P = X^T X + eta I`.

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::linalg::{sym_outer, SymEig, PINV_SINGULAR_CUTOFF};
use crate::scalar::{lit, Real};
use nalgebra::DMatrix;

/// Smoothness metadata of a convex cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness<T: Real> {
    /// Gradient Lipschitz constant `L1` (also bounds `||hess phi||`).
    pub lip_grad: T,
    /// True when `lip_grad` comes from a numerical estimate rather than a
    /// closed form.
    pub lip_grad_estimated: bool,
    /// Hessian Lipschitz constant `L2`, when known.
    pub lip_hess: Option<T>,
    /// Restricted strong convexity modulus, when known.
    pub rsc_mu: Option<T>,
}

/// Boxed Hessian-vector product of `f` at a fixed point.
pub type HessianOp<'a, T> = Box<dyn Fn(&DMatrix<T>) -> DMatrix<T> + Send + Sync + 'a>;

/// Oracle bundle for a smooth convex cost `phi` over symmetric n x n matrices.
///
/// The dense methods work on materialized matrices. The `factored_*` methods
/// take the factor `X` directly; models whose structure allows it override
/// them to avoid the n x n intermediates.
pub trait ConvexCost<T: Real>: Send + Sync {
    /// Ambient dimension n.
    fn dim(&self) -> usize;

    fn smoothness(&self) -> Smoothness<T>;

    /// `phi(M)`.
    fn value(&self, m: &DMatrix<T>) -> T;

    /// `grad phi(M)`, symmetric for symmetric `M`.
    fn gradient(&self, m: &DMatrix<T>) -> DMatrix<T>;

    /// `hess phi(M)[E]`; `None` for models without second-order information.
    fn hessian_apply(&self, _m: &DMatrix<T>, _e: &DMatrix<T>) -> Option<DMatrix<T>> {
        None
    }

    fn has_hessian(&self) -> bool {
        false
    }

    /// Optimal value `phi(M*)`, when known.
    fn optimal_value(&self) -> Option<T> {
        None
    }

    fn factored_value(&self, x: &DMatrix<T>) -> T {
        self.value(&(x * x.transpose()))
    }

    /// `grad f(X) = 2 grad phi(X X^T) X`.
    fn factored_gradient(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let g = self.gradient(&(x * x.transpose()));
        (g * x) * lit::<T>(2.0)
    }

    /// `(f(X), grad f(X))` together; models override this to share work.
    fn factored_eval(&self, x: &DMatrix<T>) -> (T, DMatrix<T>) {
        (self.factored_value(x), self.factored_gradient(x))
    }

    /// `f(X) - f*` given `value = f(X)`, evaluated so that it stays accurate
    /// near the optimum.
    fn factored_gap(&self, _x: &DMatrix<T>, value: T) -> Option<T> {
        self.optimal_value().map(|f| value - f)
    }

    /// Hessian of `f` at `X` as an operator `V -> hess f(X)[V]`:
    /// `2 grad phi(XX^T) V + 2 hess phi(XX^T)[X V^T + V X^T] X`.
    fn hessian_at<'a>(&'a self, x: &'a DMatrix<T>) -> Option<HessianOp<'a, T>> {
        if !self.has_hessian() {
            return None;
        }
        let m = x * x.transpose();
        let g = self.gradient(&m);
        let two = lit::<T>(2.0);
        Some(Box::new(move |v: &DMatrix<T>| {
            let e = sym_outer(x, v);
            let h = self
                .hessian_apply(&m, &e)
                .expect("has_hessian() promised hessian_apply");
            (&g * v + h * x) * two
        }))
    }

    fn name(&self) -> &str;
}

fn check_dim<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>, ctx: &'static str) -> Result<()> {
    if x.n() != model.dim() {
        return Err(Error::shape(ctx, (model.dim(), x.r()), x.shape()));
    }
    Ok(())
}

fn finite<T: Real>(v: T, ctx: &'static str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: ctx,
            iteration: None,
        })
    }
}

fn finite_mat<T: Real>(m: DMatrix<T>, ctx: &'static str) -> Result<DMatrix<T>> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(Error::NonFinite {
            context: ctx,
            iteration: None,
        })
    }
}

/// `f(X) = phi(X X^T)`.
pub fn cost<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>) -> Result<T> {
    check_dim(model, x, "cost")?;
    finite(model.factored_value(x), "cost")
}

/// Euclidean gradient `2 grad phi(X X^T) X`.
pub fn grad<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>) -> Result<DMatrix<T>> {
    check_dim(model, x, "grad")?;
    finite_mat(model.factored_gradient(x), "grad")
}

/// Analytic Hessian-vector product `hess f(X)[V]`.
pub fn hess_vec<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    v: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    check_dim(model, x, "hess_vec")?;
    x.check_direction(v, "hess_vec direction")?;
    let op = model.hessian_at(x.as_matrix()).ok_or_else(|| {
        Error::Capability(format!(
            "model `{}` has no analytic Hessian; use hess_vec_fd",
            model.name()
        ))
    })?;
    finite_mat(op(v), "hess_vec")
}

/// Finite-difference scheme for Hessian-vector products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdScheme {
    /// `(grad f(X + tV) - grad f(X)) / t`
    #[default]
    Forward,
    /// `(grad f(X + tV) - grad f(X - tV)) / 2t`
    Central,
}

/// Scale-adaptive default step `1e-6 max(1, ||X||) / max(1, ||V||)`.
pub fn default_fd_step<T: Real>(x: &DMatrix<T>, v: &DMatrix<T>) -> T {
    lit::<T>(1e-6) * x.norm().max(T::one()) / v.norm().max(T::one())
}

/// Hessian-vector product from two gradient evaluations.
///
/// `t = None` selects [`default_fd_step`].
pub fn hess_vec_fd<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    v: &DMatrix<T>,
    t: Option<T>,
    scheme: FdScheme,
) -> Result<DMatrix<T>> {
    check_dim(model, x, "hess_vec_fd")?;
    x.check_direction(v, "hess_vec_fd direction")?;
    let t = t.unwrap_or_else(|| default_fd_step(x.as_matrix(), v));
    if !(t > T::zero()) {
        return Err(Error::param("t", "finite-difference step must be positive"));
    }
    if v.iter().all(|e| *e == T::zero()) {
        return Ok(DMatrix::zeros(x.n(), x.r()));
    }
    let xm = x.as_matrix();
    let plus = model.factored_gradient(&(xm + v * t));
    let out = match scheme {
        FdScheme::Forward => (plus - model.factored_gradient(xm)) / t,
        FdScheme::Central => (plus - model.factored_gradient(&(xm - v * t))) / (t + t),
    };
    finite_mat(out, "hess_vec_fd")
}

/// Preconditioner `P = X^T X + eta I` with its eigendecomposition.
///
/// With `eta = 0` and rank-deficient `X`, eigenvalues below the
/// pseudo-inverse cutoff are treated as zero; negative powers then act as
/// pseudo-inverse powers and the local norm is only a seminorm.
#[derive(Debug, Clone)]
pub struct LocalNormContext<T: Real> {
    eta: T,
    gram_plus: DMatrix<T>,
    eig: SymEig<T>,
    zero_below: T,
}

impl<T: Real> LocalNormContext<T> {
    pub fn new(x: &Factor<T>, eta: T) -> Result<Self> {
        if !(eta >= T::zero()) || !eta.is_finite() {
            return Err(Error::param("eta", "must be finite and nonnegative"));
        }
        let gram_plus = x.gram() + DMatrix::identity(x.r(), x.r()) * eta;
        let eig = SymEig::new(&gram_plus);
        let cutoff = lit::<T>(PINV_SINGULAR_CUTOFF);
        let zero_below = eig.max().max(T::zero()) * cutoff * cutoff;
        Ok(Self {
            eta,
            gram_plus,
            eig,
            zero_below,
        })
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    /// `X^T X + eta I`.
    pub fn gram_plus(&self) -> &DMatrix<T> {
        &self.gram_plus
    }

    /// Ascending eigenvalues of `P`.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eig.values
    }

    /// True when `P` has eigenvalues treated as zero (seminorm case).
    pub fn is_rank_deficient(&self) -> bool {
        self.eig.values.iter().any(|&p| p <= self.zero_below)
    }

    /// `P^s` (pseudo-power for negative `s` on the numerically singular part).
    pub fn power(&self, s: f64) -> DMatrix<T> {
        let s = lit::<T>(s);
        let cut = self.zero_below;
        self.eig.map(|p| if p <= cut { T::zero() } else { p.powf(s) })
    }

    /// `V P^s`.
    pub fn apply_power(&self, v: &DMatrix<T>, s: f64) -> DMatrix<T> {
        v * self.power(s)
    }

    /// `||V||_{X,eta} = ||V P^{1/2}||_F`.
    pub fn local_norm(&self, v: &DMatrix<T>) -> T {
        self.apply_power(v, 0.5).norm()
    }

    /// `||V||*_{X,eta} = ||V P^{-1/2}||_F`.
    pub fn dual_local_norm(&self, v: &DMatrix<T>) -> T {
        self.apply_power(v, -0.5).norm()
    }
}

/// `||V||_{X,eta}` for a one-off evaluation.
pub fn local_norm<T: Real>(x: &Factor<T>, eta: T, v: &DMatrix<T>) -> Result<T> {
    x.check_direction(v, "local_norm")?;
    Ok(LocalNormContext::new(x, eta)?.local_norm(v))
}

/// `||V||*_{X,eta}` for a one-off evaluation.
pub fn dual_local_norm<T: Real>(x: &Factor<T>, eta: T, v: &DMatrix<T>) -> Result<T> {
    x.check_direction(v, "dual_local_norm")?;
    Ok(LocalNormContext::new(x, eta)?.dual_local_norm(v))
}
