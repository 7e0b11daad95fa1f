//! A-posteriori global optimality certificates based on rank deficiency, and
//! the matrix-free estimator for the smallest Hessian eigenvalue.

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::linalg::{inner, orthonormalize_columns, SymEig};
use crate::objective::{default_fd_step, ConvexCost, LocalNormContext};
use crate::rng::{gaussian_matrix, seeded, stream};
use crate::scalar::{lit, Real};
use nalgebra::DMatrix;

/// Safety factor applied to numerically estimated Lipschitz constants.
pub const ESTIMATE_SAFETY_FACTOR: f64 = 1.05;

/// Unshifted power steps used to pick the default shift.
pub const SHIFT_POWER_STEPS: usize = 30;

/// Multiplier on the unshifted estimate of `lambda_max`.
pub const SHIFT_OVERESTIMATE: f64 = 1.1;

/// Consecutive small Rayleigh-quotient changes required to stop.
pub const STALL_STEPS: usize = 3;

/// `lambda_min(X^T X)`.
pub fn rank_deficiency<T: Real>(x: &Factor<T>) -> T {
    SymEig::new(&x.gram()).min().max(T::zero())
}

/// Where Hessian-vector products come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianSource {
    /// Analytic when the model provides it, finite differences otherwise.
    #[default]
    Auto,
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigConfig<T: Real> {
    /// Shift `lambda` of the iterated operator `lambda I - H`; `None` picks
    /// [`SHIFT_OVERESTIMATE`] times a [`SHIFT_POWER_STEPS`]-step estimate.
    pub shift: Option<T>,
    pub block_size: usize,
    /// Relative Rayleigh-quotient change regarded as converged.
    pub tol: T,
    pub max_iters: usize,
    pub source: HessianSource,
    /// Seed of the random starting block.
    pub seed: u64,
}

impl<T: Real> Default for EigConfig<T> {
    fn default() -> Self {
        Self {
            shift: None,
            block_size: 1,
            tol: lit(1e-10),
            max_iters: 5000,
            source: HessianSource::Auto,
            seed: 0,
        }
    }
}

impl<T: Real> EigConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.block_size == 0 {
            return Err(Error::param("block_size", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if let Some(s) = self.shift {
            if !s.is_finite() {
                return Err(Error::param("shift", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Result of a smallest-eigenvalue estimation.
#[derive(Debug, Clone)]
pub struct EigEstimate<T: Real> {
    /// Estimate of `lambda_min`; never below the true value up to rounding,
    /// since it is a Rayleigh quotient.
    pub value: T,
    pub shift: T,
    /// Power iterations on the shifted operator.
    pub iterations: usize,
    /// Operator applications including the shift estimation.
    pub matvecs: usize,
    pub converged: bool,
    /// Largest Ritz value of the shifted operator at each iteration.
    pub history: Vec<T>,
    /// Final orthonormal block, usable as a warm start.
    pub block: Vec<DMatrix<T>>,
}

/// Whether one power step has settled to relative accuracy `tol`.
///
/// The Ritz value converges geometrically with ratio `rho`, estimated from
/// two successive changes, so the remaining error is about
/// `delta * rho / (1 - rho)`. A small step alone is not enough when `rho` is
/// close to one. Changes at the rounding floor always count as settled.
fn settled<T: Real>(delta: T, prev_delta: T, scale: T, tol: T) -> bool {
    let target = tol * scale;
    if delta <= T::epsilon() * scale {
        return true;
    }
    if delta > target || !prev_delta.is_finite() {
        return false;
    }
    let rho = delta / prev_delta;
    rho < T::one() && delta * rho / (T::one() - rho) <= target
}

/// Smallest eigenvalue of a symmetric linear operator on `rows x cols`
/// matrices by (block) shifted power iteration.
pub fn min_eig_symmetric<T: Real>(
    apply: impl Fn(&DMatrix<T>) -> DMatrix<T>,
    rows: usize,
    cols: usize,
    cfg: &EigConfig<T>,
    warm_start: Option<&[DMatrix<T>]>,
) -> Result<EigEstimate<T>> {
    cfg.validate()?;
    let dim = rows * cols;
    let b = cfg.block_size.min(dim);
    let mut rng = seeded(cfg.seed, stream::EIGEN);
    let mut block: Vec<DMatrix<T>> = match warm_start {
        Some(w) if w.len() == b && w.iter().all(|m| m.shape() == (rows, cols)) => w.to_vec(),
        _ => (0..b).map(|_| gaussian_matrix(&mut rng, rows, cols)).collect(),
    };
    orthonormalize_columns(&mut block);
    let mut matvecs = 0;

    let shift = match cfg.shift {
        Some(s) => s,
        None => {
            let mut v: DMatrix<T> = block[0].clone();
            let mut est = T::zero();
            for _ in 0..SHIFT_POWER_STEPS {
                let w = apply(&v);
                matvecs += 1;
                let nrm = w.norm();
                if !nrm.is_finite() {
                    return Err(Error::NonFinite {
                        context: "min_hess_eig shift",
                        iteration: None,
                    });
                }
                est = est.max(nrm);
                if nrm == T::zero() {
                    break;
                }
                v = w / nrm;
            }
            (est * lit(SHIFT_OVERESTIMATE)).max(T::epsilon())
        }
    };

    let mut history = Vec::new();
    let mut stall = 0;
    let mut converged = false;
    let mut theta = T::zero();
    let mut prev_delta = lit::<T>(f64::INFINITY);
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut images: Vec<DMatrix<T>> = block
            .iter()
            .map(|v| {
                matvecs += 1;
                v * shift - apply(v)
            })
            .collect();
        let g = DMatrix::from_fn(b, b, |i, j| inner(&block[i], &images[j]));
        let next = SymEig::new(&g).max();
        if !next.is_finite() {
            return Err(Error::NonFinite {
                context: "min_hess_eig",
                iteration: Some(iterations),
            });
        }
        history.push(next);
        let delta = (next - theta).abs();
        if iterations > 1 && settled(delta, prev_delta, next.abs(), cfg.tol) {
            stall += 1;
        } else {
            stall = 0;
        }
        if iterations > 1 {
            prev_delta = delta;
        }
        theta = next;
        if stall >= STALL_STEPS {
            converged = true;
        }
        orthonormalize_columns(&mut images);
        block = images;
        if converged {
            break;
        }
    }
    Ok(EigEstimate {
        value: shift - theta,
        shift,
        iterations,
        matvecs,
        converged,
        history,
        block,
    })
}

fn resolve_source<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, source: HessianSource) -> Result<bool> {
    match source {
        HessianSource::Auto => Ok(model.has_hessian()),
        HessianSource::Analytic if model.has_hessian() => Ok(true),
        HessianSource::Analytic => Err(Error::Capability(format!(
            "model `{}` has no analytic Hessian",
            model.name()
        ))),
        HessianSource::FiniteDifference => Ok(false),
    }
}

/// Runs `body` with a Hessian-vector product closure for `f` at `x`.
fn with_hessian<T: Real, C: ConvexCost<T> + ?Sized, R>(
    model: &C,
    x: &DMatrix<T>,
    source: HessianSource,
    body: impl FnOnce(&dyn Fn(&DMatrix<T>) -> DMatrix<T>) -> R,
) -> Result<R> {
    if resolve_source(model, source)? {
        let op = model
            .hessian_at(x)
            .ok_or_else(|| Error::Capability(format!("model `{}` has no analytic Hessian", model.name())))?;
        Ok(body(&|v| op(v)))
    } else {
        let g0 = model.factored_gradient(x);
        let fd = |v: &DMatrix<T>| {
            if v.iter().all(|e| *e == T::zero()) {
                return DMatrix::zeros(v.nrows(), v.ncols());
            }
            let t = default_fd_step(x, v);
            (model.factored_gradient(&(x + v * t)) - &g0) / t
        };
        Ok(body(&fd))
    }
}

/// Estimate of `lambda_min(hess f(X))` using only Hessian-vector products.
pub fn min_hess_eig<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    cfg: &EigConfig<T>,
) -> Result<EigEstimate<T>> {
    if x.n() != model.dim() {
        return Err(Error::shape("min_hess_eig", (model.dim(), x.r()), x.shape()));
    }
    with_hessian(model, x.as_matrix(), cfg.source, |h| {
        min_eig_symmetric(h, x.n(), x.r(), cfg, None)
    })?
}

/// Problem constants entering the certificate constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateInputs<T: Real> {
    /// Upper bound on `||hess phi(X X^T)||`.
    pub l1_bound: T,
    /// Upper bound on `tr(M*) = ||X*||_F^2`.
    pub trace_bound: Option<T>,
    pub mu: Option<T>,
    pub lambda_rstar: Option<T>,
    /// Suboptimality below which a point counts as certified.
    pub target_gap: T,
}

impl<T: Real> CertificateInputs<T> {
    /// Uses the model's `L1`, inflated by [`ESTIMATE_SAFETY_FACTOR`] when it
    /// was estimated numerically.
    pub fn for_model<C: ConvexCost<T> + ?Sized>(model: &C, trace_bound: Option<T>) -> Self {
        let s = model.smoothness();
        let l1_bound = if s.lip_grad_estimated {
            s.lip_grad * lit(ESTIMATE_SAFETY_FACTOR)
        } else {
            s.lip_grad
        };
        Self {
            l1_bound,
            trace_bound,
            mu: s.rsc_mu,
            lambda_rstar: None,
            target_gap: lit(1e-6),
        }
    }

    fn validate(&self) -> Result<T> {
        let trace = self.trace_bound.ok_or_else(|| {
            Error::Capability(
                "certificate constants C_H and C_lambda need an upper bound on tr(M*); supply trace_bound".into(),
            )
        })?;
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(trace) {
            return Err(Error::param("trace_bound", "must be positive"));
        }
        if !positive(self.l1_bound) {
            return Err(Error::param("l1_bound", "must be positive"));
        }
        for (name, v) in [("mu", self.mu), ("lambda_rstar", self.lambda_rstar)] {
            if let Some(v) = v {
                if !positive(v) {
                    return Err(Error::param(name, "must be positive"));
                }
            }
        }
        if !(self.target_gap >= T::zero()) {
            return Err(Error::param("target_gap", "must be nonnegative"));
        }
        Ok(trace)
    }

    /// Rank threshold separating global from spurious second-order points,
    /// available when `mu` and `lambda_rstar` are known.
    pub fn spurious_threshold(&self) -> Option<T> {
        match (self.mu, self.lambda_rstar, self.trace_bound) {
            (Some(mu), Some(lr), Some(tr)) => Some(spurious_threshold(mu, self.l1_bound, lr, tr)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedNearOptimal,
    Undetermined,
    LikelySpurious,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CertifiedNearOptimal => "certified-near-optimal",
            Verdict::Undetermined => "undetermined",
            Verdict::LikelySpurious => "likely-spurious",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport<T: Real> {
    pub eps_g: T,
    pub eps_h: T,
    pub eps_lambda: T,
    pub c_g: T,
    pub c_h: T,
    pub c_lambda: T,
    /// `Some(eta)` for the local-norm certificate.
    pub eta: Option<T>,
    pub bound: T,
    pub verdict: Verdict,
    pub lambda_min_estimate: T,
    pub power_iters_used: usize,
    pub eig_converged: bool,
}

impl<T: Real> CertificateReport<T> {
    /// Coefficient multiplying `eps_h` in the bound.
    pub fn h_weight(&self) -> T {
        match self.eta {
            Some(eta) => self.c_h * (self.eps_lambda + eta),
            None => self.c_h,
        }
    }

    /// `c_g eps_g + h_weight eps_h + c_lambda eps_lambda`.
    pub fn assemble(&self) -> T {
        self.c_g * self.eps_g + self.h_weight() * self.eps_h + self.c_lambda * self.eps_lambda
    }
}

/// Reusable certificate evaluator that warm-starts the eigen-estimator from
/// the previous call.
#[derive(Debug, Clone)]
pub struct Certifier<T: Real> {
    pub inputs: CertificateInputs<T>,
    pub eig: EigConfig<T>,
    warm: Option<Vec<DMatrix<T>>>,
}

impl<T: Real> Certifier<T> {
    pub fn new(inputs: CertificateInputs<T>, eig: EigConfig<T>) -> Result<Self> {
        inputs.validate()?;
        eig.validate()?;
        Ok(Self {
            inputs,
            eig,
            warm: None,
        })
    }

    /// Euclidean certificate at `x` given `grad = grad f(X)`.
    pub fn euclidean<C: ConvexCost<T> + ?Sized>(
        &mut self,
        model: &C,
        x: &Factor<T>,
        grad: &DMatrix<T>,
    ) -> Result<CertificateReport<T>> {
        let trace = self.inputs.validate()?;
        x.check_direction(grad, "certificate gradient")?;
        let warm = self.warm.take();
        let est = with_hessian(model, x.as_matrix(), self.eig.source, |h| {
            min_eig_symmetric(h, x.n(), x.r(), &self.eig, warm.as_deref())
        })??;
        let half = lit::<T>(0.5);
        let report = self.finish(
            grad.norm(),
            &est,
            rank_deficiency(x),
            half * x.as_matrix().norm(),
            half * trace,
            lit::<T>(2.0) * self.inputs.l1_bound * trace,
            None,
        );
        self.warm = Some(est.block);
        Ok(report)
    }

    /// Local-norm certificate at `x` with preconditioner `X^T X + eta I`.
    pub fn local<C: ConvexCost<T> + ?Sized>(
        &mut self,
        model: &C,
        x: &Factor<T>,
        grad: &DMatrix<T>,
        eta: T,
    ) -> Result<CertificateReport<T>> {
        let trace = self.inputs.validate()?;
        x.check_direction(grad, "certificate gradient")?;
        let ctx = LocalNormContext::new(x, eta)?;
        let p_inv_half = ctx.power(-0.5);
        let warm = self.warm.take();
        // W -> hess f[W P^{-1/2}] P^{-1/2}, whose spectrum is that of the
        // P-generalized Rayleigh quotient
        let est = with_hessian(model, x.as_matrix(), self.eig.source, |h| {
            let conj = |w: &DMatrix<T>| h(&(w * &p_inv_half)) * &p_inv_half;
            min_eig_symmetric(conj, x.n(), x.r(), &self.eig, warm.as_deref())
        })??;
        let gram = x.gram();
        let half = lit::<T>(0.5);
        let c_g = half * (gram.norm_squared() + eta * x.as_matrix().norm_squared()).sqrt();
        let report = self.finish(
            ctx.dual_local_norm(grad),
            &est,
            rank_deficiency(x),
            c_g,
            half * trace,
            lit::<T>(2.0) * self.inputs.l1_bound * trace,
            Some(eta),
        );
        self.warm = Some(est.block);
        Ok(report)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        eps_g: T,
        est: &EigEstimate<T>,
        eps_lambda: T,
        c_g: T,
        c_h: T,
        c_lambda: T,
        eta: Option<T>,
    ) -> CertificateReport<T> {
        let mut report = CertificateReport {
            eps_g,
            eps_h: (-est.value).max(T::zero()),
            eps_lambda,
            c_g,
            c_h,
            c_lambda,
            eta,
            bound: T::zero(),
            verdict: Verdict::Undetermined,
            lambda_min_estimate: est.value,
            power_iters_used: est.iterations,
            eig_converged: est.converged,
        };
        report.bound = report.assemble();
        let stationary_part = report.c_g * report.eps_g + report.h_weight() * report.eps_h;
        report.verdict = if report.bound <= self.inputs.target_gap {
            Verdict::CertifiedNearOptimal
        } else {
            match self.inputs.spurious_threshold() {
                Some(th) if stationary_part <= self.inputs.target_gap && eps_lambda > th => Verdict::LikelySpurious,
                _ => Verdict::Undetermined,
            }
        };
        report
    }
}

/// Euclidean certificate `f(X) - f* <= C_g eps_g + C_H eps_H + C_lambda eps_lambda`.
pub fn certificate_euclidean<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    inputs: &CertificateInputs<T>,
    eig: &EigConfig<T>,
) -> Result<CertificateReport<T>> {
    let g = crate::objective::grad(model, x)?;
    Certifier::new(*inputs, *eig)?.euclidean(model, x, &g)
}

/// Local-norm certificate
/// `f(X) - f* <= C_g eps_g + C_H eps_H (eps_lambda + eta) + C_lambda eps_lambda`.
pub fn certificate_local<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    eta: T,
    inputs: &CertificateInputs<T>,
    eig: &EigConfig<T>,
) -> Result<CertificateReport<T>> {
    let g = crate::objective::grad(model, x)?;
    Certifier::new(*inputs, *eig)?.local(model, x, &g, eta)
}

/// Approximate second-order stationarity with rank deficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityThresholds<T: Real> {
    pub eps_g: T,
    pub eps_h: T,
    pub rho: T,
}

/// True iff `||grad f|| <= eps_g`, `lambda_min(hess f) >= -eps_h` and
/// `lambda_min(X^T X) <= rho`. Cheap clauses are tested first, so the
/// eigen-estimator only runs when the other two hold.
pub fn stationarity_check<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    thresholds: &StationarityThresholds<T>,
    eig: &EigConfig<T>,
) -> Result<bool> {
    let g = crate::objective::grad(model, x)?;
    stationarity_check_with_grad(model, x, &g, thresholds, eig)
}

/// [`stationarity_check`] with a precomputed gradient.
pub fn stationarity_check_with_grad<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    grad: &DMatrix<T>,
    thresholds: &StationarityThresholds<T>,
    eig: &EigConfig<T>,
) -> Result<bool> {
    let StationarityThresholds { eps_g, eps_h, rho } = *thresholds;
    if !(eps_g > T::zero() && eps_h > T::zero() && rho > T::zero()) {
        return Err(Error::param("thresholds", "eps_g, eps_h and rho must be positive"));
    }
    if rank_deficiency(x) > rho || grad.norm() > eps_g {
        return Ok(false);
    }
    Ok(min_hess_eig(model, x, eig)?.value >= -eps_h)
}

/// `mu / (4 (L1 + mu)) * lambda_{r*}^2 / tr(M*)`.
pub fn spurious_threshold<T: Real>(mu: T, l1: T, lambda_rstar: T, trace: T) -> T {
    mu / (lit::<T>(4.0) * (l1 + mu)) * lambda_rstar * lambda_rstar / trace
}

/// Ground-truth information for spurious-point classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthInfo<T: Real> {
    pub mu: T,
    pub l1: T,
    pub lambda_rstar: T,
    pub trace_mstar: T,
    pub r_star: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Global,
    Spurious,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpuriousClassification<T: Real> {
    pub class: PointClass,
    pub threshold: T,
    pub eps_lambda: T,
}

/// Classifies an (approximately) second-order stationary `Z` by comparing
/// `lambda_min(Z^T Z)` with [`spurious_threshold`]. Needs `r > r*`.
pub fn classify_spurious<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    z: &Factor<T>,
    info: &GroundTruthInfo<T>,
) -> Result<SpuriousClassification<T>> {
    if z.n() != model.dim() {
        return Err(Error::shape("classify_spurious", (model.dim(), z.r()), z.shape()));
    }
    if z.r() <= info.r_star {
        return Err(Error::Capability(format!(
            "spurious classification needs search rank r = {} > r* = {}",
            z.r(),
            info.r_star
        )));
    }
    for (name, v) in [
        ("mu", info.mu),
        ("l1", info.l1),
        ("lambda_rstar", info.lambda_rstar),
        ("trace_mstar", info.trace_mstar),
    ] {
        if !(v > T::zero()) {
            return Err(Error::param(name, "must be positive"));
        }
    }
    let threshold = spurious_threshold(info.mu, info.l1, info.lambda_rstar, info.trace_mstar);
    let eps_lambda = rank_deficiency(z);
    Ok(SpuriousClassification {
        class: if eps_lambda > threshold {
            PointClass::Spurious
        } else {
            PointClass::Global
        },
        threshold,
        eps_lambda,
    })
}
