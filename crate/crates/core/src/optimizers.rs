//! GD, ScaledGD, PrecGD and perturbed PrecGD on `f(X) = phi(X X^T)`, and the
//! driver loop that records a trace of every iterate.

use crate::certify::{rank_deficiency, stationarity_check_with_grad, CertificateReport, Certifier, EigConfig,
    StationarityThresholds};
use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::objective::{ConvexCost, LocalNormContext};
use crate::rng::{seeded, stream, uniform_ball, SeededRng};
use crate::scalar::{lit, Real};
use nalgebra::DMatrix;
use rand::Rng;

/// Power of `X^T X` in the adaptive regularization rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaRule {
    /// `eta = ||grad f(X) (X^T X)^{-1/2}||_F`.
    #[default]
    InvSqrt,
    /// `eta = ||grad f(X) (X^T X)^{-1}||_F`.
    Inv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMode<T: Real> {
    Fixed(T),
    Adaptive(EtaRule),
    Zero,
}

impl<T: Real> Default for EtaMode<T> {
    fn default() -> Self {
        EtaMode::Adaptive(EtaRule::InvSqrt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig<T: Real> {
    pub alpha: T,
    pub eta_mode: EtaMode<T>,
    pub max_iters: usize,
    /// Stop once `||X X^T - M*||_F <= tol_error`; needs a ground truth, 0 disables.
    pub tol_error: T,
    /// Stop once `||grad f||_F <= tol_grad`; `None` means `1e-14 max(1, f(X0))`.
    pub tol_grad: Option<T>,
}

impl<T: Real> StepConfig<T> {
    pub fn new(alpha: T) -> Self {
        Self {
            alpha,
            eta_mode: EtaMode::default(),
            max_iters: 1000,
            tol_error: T::zero(),
            tol_grad: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be positive and finite"));
        }
        if let EtaMode::Fixed(eta) = self.eta_mode {
            if !(eta >= T::zero() && eta.is_finite()) {
                return Err(Error::param("eta", "fixed eta must be finite and nonnegative"));
            }
        }
        if !(self.tol_error >= T::zero()) {
            return Err(Error::param("tol_error", "must be nonnegative"));
        }
        if let Some(t) = self.tol_grad {
            if !(t >= T::zero()) {
                return Err(Error::param("tol_grad", "must be nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig<T: Real> {
    pub eta_fixed: T,
    /// Radius of the Frobenius ball perturbations are drawn from.
    pub beta: T,
    /// Minimum number of iterations between perturbations.
    pub period: usize,
    /// Dual-norm gradient threshold below which a perturbation may fire.
    pub eps_threshold: T,
    pub seed: u64,
}

impl<T: Real> PerturbConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.eta_fixed) {
            return Err(Error::param("eta_fixed", "must be positive"));
        }
        if !positive(self.beta) {
            return Err(Error::param("beta", "must be positive"));
        }
        if !positive(self.eps_threshold) {
            return Err(Error::param("eps_threshold", "must be positive"));
        }
        if self.period == 0 {
            return Err(Error::param("period", "must be at least 1"));
        }
        Ok(())
    }
}

/// Parameters suggested by the global convergence theorem for PPrecGD, with
/// every unspecified polylogarithmic constant set to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbTheory<T: Real> {
    pub alpha: T,
    pub perturb: PerturbConfig<T>,
    /// `9 Gamma^2 L1`.
    pub ell_1: T,
    /// `(4 Gamma + 2) L1 + 4 Gamma^2 L2`.
    pub ell_2: T,
    /// `5 max(ell_2, 2 Gamma ell_1 sqrt(Gamma^2 + eta)) / eta^2.5`.
    pub l_d: T,
}

/// `alpha = eta / ell_1`, `beta = eps / L_d`, `T = ceil(L1 Gamma^2 / (eta sqrt(L_d eps)))`.
pub fn perturb_theory_defaults<T: Real>(l1: T, l2: T, gamma: T, eta: T, eps: T, seed: u64) -> Result<PerturbTheory<T>> {
    for (name, v) in [("l1", l1), ("gamma", gamma), ("eta", eta), ("eps", eps)] {
        if !(v > T::zero()) {
            return Err(Error::param(name, "must be positive"));
        }
    }
    if !(l2 >= T::zero()) {
        return Err(Error::param("l2", "must be nonnegative"));
    }
    let g2 = gamma * gamma;
    let ell_1 = lit::<T>(9.0) * g2 * l1;
    let ell_2 = (lit::<T>(4.0) * gamma + lit(2.0)) * l1 + lit::<T>(4.0) * g2 * l2;
    let l_d = lit::<T>(5.0) * ell_2.max(lit::<T>(2.0) * gamma * ell_1 * (g2 + eta).sqrt()) / eta.powf(lit(2.5));
    let period = (l1 * g2 / (eta * (l_d * eps).sqrt())).ceil().to_f64_lossy().max(1.0) as usize;
    Ok(PerturbTheory {
        alpha: eta / ell_1,
        perturb: PerturbConfig {
            eta_fixed: eta,
            beta: eps / l_d,
            period,
            eps_threshold: eps,
            seed,
        },
        ell_1,
        ell_2,
        l_d,
    })
}

/// Local smoothness constant `ell = 4L + (2L + 8L^2)/C_lb + 4L^3/C_lb^2`
/// valid when `eta >= C_lb ||X X^T - M*||_F`.
pub fn theory_ell<T: Real>(l1: T, c_lb: T) -> T {
    lit::<T>(4.0) * l1 + (lit::<T>(2.0) * l1 + lit::<T>(8.0) * l1 * l1) / c_lb
        + lit::<T>(4.0) * l1 * l1 * l1 / (c_lb * c_lb)
}

/// `min(1, 1/ell)`.
pub fn theory_step_size<T: Real>(l1: T, c_lb: T) -> T {
    T::one().min(T::one() / theory_ell(l1, c_lb))
}

/// Linear rate constant `tau` of the local convergence theorem.
pub fn theory_tau<T: Real>(mu: T, l1: T, c_ub: T, r: usize, r_star: usize) -> T {
    let gap = lit::<T>(r.saturating_sub(r_star) as f64).sqrt();
    let inner = T::one() + lit::<T>(std::f64::consts::SQRT_2) + (l1 + mu) / (l1 * mu).sqrt() * gap;
    mu * mu / (lit::<T>(2.0) * l1) / (T::one() + c_ub * inner)
}

/// Lower clamp `1e-30 + eps ||X^T X||_F` for the adaptive rule.
pub fn eta_floor<T: Real>(x: &Factor<T>) -> T {
    lit::<T>(1e-30) + T::epsilon() * x.gram().norm()
}

fn adaptive_from_grad<T: Real>(x: &Factor<T>, g: &DMatrix<T>, rule: EtaRule) -> Result<T> {
    let ctx = LocalNormContext::new(x, T::zero())?;
    let raw = match rule {
        EtaRule::InvSqrt => ctx.dual_local_norm(g),
        EtaRule::Inv => ctx.apply_power(g, -1.0).norm(),
    };
    Ok(raw.max(eta_floor(x)))
}

/// Adaptive regularization `||grad f(X) (X^T X)^{-1/2}||_F`, using the
/// pseudo-inverse on the numerically rank-deficient part and clamped below
/// by [`eta_floor`].
pub fn eta_adaptive<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>) -> Result<T> {
    eta_adaptive_with(model, x, EtaRule::InvSqrt)
}

pub fn eta_adaptive_with<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>, rule: EtaRule) -> Result<T> {
    let g = crate::objective::grad(model, x)?;
    adaptive_from_grad(x, &g, rule)
}

/// `G P^{-1}` with `P = X^T X + eta I`. Falls back to the pseudo-inverse
/// when `P` is numerically singular, reported by the flag.
fn precondition<T: Real>(g: &DMatrix<T>, ctx: &LocalNormContext<T>) -> (DMatrix<T>, bool) {
    if !ctx.is_rank_deficient() {
        if let Some(ch) = ctx.gram_plus().clone().cholesky() {
            return (ch.solve(&g.transpose()).transpose(), false);
        }
    }
    (ctx.apply_power(g, -1.0), true)
}

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::param("alpha", "must be positive and finite"))
    }
}

fn finish_step<T: Real>(x: &Factor<T>, dir: &DMatrix<T>, alpha: T, ctx: &'static str) -> Result<Factor<T>> {
    let next = x.as_matrix() - dir * alpha;
    if next.iter().all(|v| v.is_finite()) {
        Factor::new(next)
    } else {
        Err(Error::NonFinite {
            context: ctx,
            iteration: None,
        })
    }
}

/// `X - alpha grad f(X)`.
pub fn gd_step<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>, alpha: T) -> Result<Factor<T>> {
    check_alpha(alpha)?;
    let g = crate::objective::grad(model, x)?;
    finish_step(x, &g, alpha, "gd_step")
}

/// A preconditioned step together with whether a pseudo-inverse was needed.
#[derive(Debug, Clone)]
pub struct PreconditionedStep<T: Real> {
    pub x: Factor<T>,
    pub pseudo_inverse: bool,
}

/// `X - alpha grad f(X) (X^T X)^{-1}`, with the pseudo-inverse on
/// numerically rank-deficient `X`.
pub fn scaled_gd_step<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x: &Factor<T>,
    alpha: T,
) -> Result<PreconditionedStep<T>> {
    check_alpha(alpha)?;
    let g = crate::objective::grad(model, x)?;
    let (dir, pseudo_inverse) = precondition(&g, &LocalNormContext::new(x, T::zero())?);
    Ok(PreconditionedStep {
        x: finish_step(x, &dir, alpha, "scaled_gd_step")?,
        pseudo_inverse,
    })
}

/// `X - alpha grad f(X) (X^T X + eta I)^{-1}` via an r x r solve.
pub fn precgd_step<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>, alpha: T, eta: T) -> Result<Factor<T>> {
    check_alpha(alpha)?;
    let g = crate::objective::grad(model, x)?;
    let (dir, _) = precondition(&g, &LocalNormContext::new(x, eta)?);
    finish_step(x, &dir, alpha, "precgd_step")
}

#[derive(Debug, Clone)]
pub struct PerturbedStep<T: Real> {
    pub x: Factor<T>,
    pub perturbed: bool,
    /// `||grad f(X) (X^T X + eta_fixed I)^{-1/2}||_F` at the input point.
    pub dual_grad: T,
}

fn should_perturb<T: Real>(dual: T, k: usize, k_last: Option<usize>, cfg: &PerturbConfig<T>) -> bool {
    dual <= cfg.eps_threshold && k_last.is_none_or(|last| k >= last + cfg.period)
}

/// One PPrecGD iteration from iterate index `k`. Updates `k_last` when a
/// perturbation fires.
pub fn pprecgd_step<T: Real, C: ConvexCost<T> + ?Sized, R: Rng + ?Sized>(
    model: &C,
    x: &Factor<T>,
    k: usize,
    k_last: &mut Option<usize>,
    alpha: T,
    cfg: &PerturbConfig<T>,
    rng: &mut R,
) -> Result<PerturbedStep<T>> {
    check_alpha(alpha)?;
    cfg.validate()?;
    let g = crate::objective::grad(model, x)?;
    let ctx = LocalNormContext::new(x, cfg.eta_fixed)?;
    let dual_grad = ctx.dual_local_norm(&g);
    let (mut dir, _) = precondition(&g, &ctx);
    let perturbed = should_perturb(dual_grad, k, *k_last, cfg);
    if perturbed {
        dir += uniform_ball(rng, x.n(), x.r(), cfg.beta);
        *k_last = Some(k);
    }
    Ok(PerturbedStep {
        x: finish_step(x, &dir, alpha, "pprecgd_step")?,
        perturbed,
        dual_grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gd,
    ScaledGd,
    PrecGd,
    PPrecGd,
    /// PPrecGD until the stationarity predicate holds, then PrecGD with
    /// adaptive regularization.
    TwoPhase,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::ScaledGd => "scaledgd",
            Method::PrecGd => "precgd",
            Method::PPrecGd => "pprecgd",
            Method::TwoPhase => "two_phase",
        }
    }

    fn needs_perturb(self) -> bool {
        matches!(self, Method::PPrecGd | Method::TwoPhase)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Global,
    Local,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Global => "global",
            Phase::Local => "local",
        }
    }
}

/// One row of the iterate trace, describing `X_k` and the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord<T: Real> {
    pub k: usize,
    pub f_value: T,
    pub f_gap: Option<T>,
    pub error_fro: Option<T>,
    /// Regularization used for the step; `None` for plain GD.
    pub eta_used: Option<T>,
    pub grad_fro: T,
    /// `||grad f (X^T X + eta I)^{-1/2}||_F` with `eta = eta_used` (0 for GD).
    pub dual_grad_norm: T,
    pub lambda_min_gram: T,
    pub perturbed: bool,
    pub phase: Phase,
    /// The preconditioner needed a pseudo-inverse.
    pub rank_deficient: bool,
    pub certificate: Option<CertificateReport<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    MaxIters,
    TolError,
    TolGrad,
    /// `f` exceeded `DIVERGENCE_FACTOR * f(X0)`.
    Diverged { iteration: usize },
    NonFinite { iteration: usize },
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::MaxIters => "max_iters",
            Termination::TolError => "tol_error",
            Termination::TolGrad => "tol_grad",
            Termination::Diverged { .. } => "diverged",
            Termination::NonFinite { .. } => "non_finite",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::Diverged { .. } | Termination::NonFinite { .. })
    }
}

/// Growth of `f` over `f(X0)` treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct SolverState<T: Real> {
    pub x: Factor<T>,
    pub k: usize,
    pub k_last: Option<usize>,
    pub phase: Phase,
    pub trace: Vec<IterateRecord<T>>,
    pub switch_iteration: Option<usize>,
    pub termination: Termination,
}

/// Phase-switch predicate for [`Method::TwoPhase`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchConfig<T: Real> {
    pub thresholds: StationarityThresholds<T>,
    pub eig: EigConfig<T>,
    /// Step size of the local phase; defaults to the global one.
    pub local_alpha: Option<T>,
}

/// Certificates computed along the run.
#[derive(Debug, Clone)]
pub struct CertifyOptions<T: Real> {
    /// Certify every `every`-th iterate and the final one; 0 disables.
    pub every: usize,
    /// Use the local-norm certificate with the iterate's `eta`.
    pub local: bool,
    pub certifier: Certifier<T>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions<T: Real> {
    pub method: Method,
    pub step: StepConfig<T>,
    pub perturb: Option<PerturbConfig<T>>,
    pub switch: Option<SwitchConfig<T>>,
    /// `M*`, enabling error tracking and error-based stopping.
    pub m_star: Option<DMatrix<T>>,
    pub certify: Option<CertifyOptions<T>>,
}

impl<T: Real> SolverOptions<T> {
    pub fn new(method: Method, step: StepConfig<T>) -> Self {
        Self {
            method,
            step,
            perturb: None,
            switch: None,
            m_star: None,
            certify: None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        self.step.validate()?;
        if self.method.needs_perturb() {
            self.perturb
                .as_ref()
                .ok_or_else(|| Error::param("perturb", format!("method {} needs a perturbation config", self.method)))?
                .validate()?;
        }
        if self.method == Method::TwoPhase {
            let sw = self
                .switch
                .as_ref()
                .ok_or_else(|| Error::param("switch", "two-phase needs switch thresholds"))?;
            if let Some(a) = sw.local_alpha {
                check_alpha(a)?;
            }
        }
        if let Some(m) = &self.m_star {
            if m.shape() != (n, n) {
                return Err(Error::shape("m_star", (n, n), m.shape()));
            }
        }
        Ok(())
    }
}

fn evaluate<T: Real, C: ConvexCost<T> + ?Sized>(model: &C, x: &Factor<T>) -> Option<(T, DMatrix<T>)> {
    let (f, g) = model.factored_eval(x.as_matrix());
    (f.is_finite() && g.iter().all(|v| v.is_finite())).then_some((f, g))
}

/// Runs `options.method` from `x0` until a stopping rule fires.
///
/// Divergence and non-finite iterates end the run with a failure
/// [`Termination`] and the trace up to that point; configuration problems
/// are returned as errors.
pub fn run_solver<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    x0: &Factor<T>,
    mut options: SolverOptions<T>,
) -> Result<SolverState<T>> {
    if x0.n() != model.dim() {
        return Err(Error::shape("run_solver X0", (model.dim(), x0.r()), x0.shape()));
    }
    options.validate(x0.n())?;
    let method = options.method;
    let step = options.step;
    let mut rng: SeededRng = seeded(options.perturb.map_or(0, |p| p.seed), stream::PERTURB);

    let mut state = SolverState {
        x: x0.clone(),
        k: 0,
        k_last: None,
        phase: if method.needs_perturb() {
            Phase::Global
        } else {
            Phase::Local
        },
        trace: Vec::new(),
        switch_iteration: None,
        termination: Termination::MaxIters,
    };
    let Some((mut f, mut g)) = evaluate(model, &state.x) else {
        state.termination = Termination::NonFinite { iteration: 0 };
        return Ok(state);
    };
    let f0 = f;
    let tol_grad = step
        .tol_grad
        .unwrap_or_else(|| lit::<T>(1e-14) * f0.abs().max(T::one()));
    let diverge_at = lit::<T>(DIVERGENCE_FACTOR) * f0.abs();

    loop {
        let k = state.k;
        if method == Method::TwoPhase && state.phase == Phase::Global {
            let sw = options.switch.as_ref().expect("validated");
            if stationarity_check_with_grad(model, &state.x, &g, &sw.thresholds, &sw.eig)? {
                state.phase = Phase::Local;
                state.switch_iteration = Some(k);
            }
        }
        let perturb = options.perturb;
        let eta = match (method, state.phase) {
            (Method::Gd, _) => None,
            (Method::ScaledGd, _) => Some(T::zero()),
            (Method::PPrecGd, _) | (Method::TwoPhase, Phase::Global) => Some(perturb.expect("validated").eta_fixed),
            (Method::PrecGd, _) => Some(match step.eta_mode {
                EtaMode::Fixed(e) => e,
                EtaMode::Zero => T::zero(),
                EtaMode::Adaptive(rule) => adaptive_from_grad(&state.x, &g, rule)?,
            }),
            (Method::TwoPhase, Phase::Local) => Some(match step.eta_mode {
                EtaMode::Adaptive(rule) => adaptive_from_grad(&state.x, &g, rule)?,
                _ => adaptive_from_grad(&state.x, &g, EtaRule::InvSqrt)?,
            }),
        };
        let ctx = LocalNormContext::new(&state.x, eta.unwrap_or(T::zero()))?;
        let grad_fro = g.norm();
        let error_fro = options
            .m_star
            .as_ref()
            .map(|ms| (state.x.outer() - ms).norm());

        let stop = if error_fro.is_some_and(|e| step.tol_error > T::zero() && e <= step.tol_error) {
            Some(Termination::TolError)
        } else if state.phase == Phase::Local && grad_fro <= tol_grad {
            // in the global phase a vanishing gradient is what triggers a perturbation
            Some(Termination::TolGrad)
        } else if f0 > T::zero() && f > diverge_at {
            Some(Termination::Diverged { iteration: k })
        } else if k >= step.max_iters {
            Some(Termination::MaxIters)
        } else {
            None
        };

        let certificate = match options.certify.as_mut() {
            Some(c) if c.every > 0 && (k % c.every == 0 || stop.is_some()) => Some(if c.local {
                c.certifier
                    .local(model, &state.x, &g, eta.unwrap_or(T::zero()))?
            } else {
                c.certifier.euclidean(model, &state.x, &g)?
            }),
            _ => None,
        };

        state.trace.push(IterateRecord {
            k,
            f_value: f,
            f_gap: model.factored_gap(state.x.as_matrix(), f),
            error_fro,
            eta_used: eta,
            grad_fro,
            dual_grad_norm: ctx.dual_local_norm(&g),
            lambda_min_gram: rank_deficiency(&state.x),
            perturbed: false,
            phase: state.phase,
            rank_deficient: false,
            certificate,
        });

        if let Some(t) = stop {
            state.termination = t;
            return Ok(state);
        }

        let (mut dir, pinv) = match method {
            Method::Gd => (g.clone(), false),
            _ => precondition(&g, &ctx),
        };
        let record = state.trace.last_mut().expect("just pushed");
        record.rank_deficient = pinv;
        let mut alpha = step.alpha;
        if state.phase == Phase::Global {
            let p = perturb.expect("validated");
            // the trigger is measured at the fixed eta of the schedule
            if should_perturb(record.dual_grad_norm, k, state.k_last, &p) {
                dir += uniform_ball(&mut rng, state.x.n(), state.x.r(), p.beta);
                state.k_last = Some(k);
                record.perturbed = true;
            }
        } else if method == Method::TwoPhase {
            alpha = options.switch.as_ref().and_then(|s| s.local_alpha).unwrap_or(alpha);
        }

        let next = state.x.as_matrix() - dir * alpha;
        state.k += 1;
        let next = match Factor::new(next) {
            Ok(x) => x,
            Err(_) => {
                state.termination = Termination::NonFinite { iteration: state.k };
                return Ok(state);
            }
        };
        state.x = next;
        match evaluate(model, &state.x) {
            Some((fv, gv)) => {
                f = fv;
                g = gv;
            }
            None => {
                state.termination = Termination::NonFinite { iteration: state.k };
                return Ok(state);
            }
        }
    }
}
