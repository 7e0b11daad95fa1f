//! Experiment configuration: a JSON document, parsed fail-closed.

use crate::error::{HarnessError, Result};
use precgd::optimizers::{EtaMode, EtaRule, Method, PerturbConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    MatrixSensing,
    OneBit,
    PhaseRetrieval,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::MatrixSensing => "matrix_sensing",
            ProblemKind::OneBit => "one_bit",
            ProblemKind::PhaseRetrieval => "phase_retrieval",
        }
    }

    fn uses_measurements(self) -> bool {
        self != ProblemKind::OneBit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Gd,
    Scaledgd,
    Precgd,
    Pprecgd,
    TwoPhase,
}

impl MethodName {
    pub fn method(self) -> Method {
        match self {
            MethodName::Gd => Method::Gd,
            MethodName::Scaledgd => Method::ScaledGd,
            MethodName::Precgd => Method::PrecGd,
            MethodName::Pprecgd => Method::PPrecGd,
            MethodName::TwoPhase => Method::TwoPhase,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.method().as_str()
    }
}

/// Step size per method. Only methods listed in `methods` need an entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaMap {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaledgd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precgd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pprecgd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_phase: Option<f64>,
}

impl AlphaMap {
    pub fn get(&self, m: MethodName) -> Option<f64> {
        match m {
            MethodName::Gd => self.gd,
            MethodName::Scaledgd => self.scaledgd,
            MethodName::Precgd => self.precgd,
            MethodName::Pprecgd => self.pprecgd,
            MethodName::TwoPhase => self.two_phase,
        }
    }
}

/// `"adaptive"`, `"adaptive_inv"`, `"zero"` or `{"fixed": eta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaModeSpec {
    Adaptive,
    AdaptiveInv,
    Zero,
    Fixed(f64),
}

impl Default for EtaModeSpec {
    fn default() -> Self {
        EtaModeSpec::Adaptive
    }
}

impl EtaModeSpec {
    pub fn mode(self) -> EtaMode<f64> {
        match self {
            EtaModeSpec::Adaptive => EtaMode::Adaptive(EtaRule::InvSqrt),
            EtaModeSpec::AdaptiveInv => EtaMode::Adaptive(EtaRule::Inv),
            EtaModeSpec::Zero => EtaMode::Zero,
            EtaModeSpec::Fixed(e) => EtaMode::Fixed(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSpec {
    #[serde(default = "defaults::eta_fixed")]
    pub eta_fixed: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::period")]
    pub period: usize,
    #[serde(default = "defaults::eps_threshold")]
    pub eps_threshold: f64,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self {
            eta_fixed: defaults::eta_fixed(),
            beta: defaults::beta(),
            period: defaults::period(),
            eps_threshold: defaults::eps_threshold(),
        }
    }
}

impl PerturbSpec {
    /// Perturbation noise is seeded from the run seed.
    pub fn config(&self, seed: u64) -> PerturbConfig<f64> {
        PerturbConfig {
            eta_fixed: self.eta_fixed,
            beta: self.beta,
            period: self.period,
            eps_threshold: self.eps_threshold,
            seed,
        }
    }
}

/// Thresholds of the stationarity predicate that ends the global phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    #[serde(default = "defaults::switch_eps")]
    pub eps_g: f64,
    #[serde(default = "defaults::switch_eps")]
    pub eps_h: f64,
    #[serde(default = "defaults::switch_eps")]
    pub rho: f64,
    /// Step size after the switch; the two-phase alpha is kept when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_alpha: Option<f64>,
}

impl Default for SwitchSpec {
    fn default() -> Self {
        Self {
            eps_g: defaults::switch_eps(),
            eps_h: defaults::switch_eps(),
            rho: defaults::switch_eps(),
            local_alpha: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// `X0 = Z_pad + radius * W` with `W` standard Gaussian.
    NearTruth { radius: f64 },
    /// `X0 = scale * W`.
    Random { scale: f64 },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::NearTruth { radius: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub n: usize,
    pub r_star: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Nonincreasing positive eigenvalues of `M*`; overrides `kappa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    /// Number of measurements. Filled with `3 n r` for the problems that have them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub methods: Vec<MethodName>,
    pub alpha: AlphaMap,
    #[serde(default)]
    pub eta_mode: EtaModeSpec,
    #[serde(default)]
    pub perturb: PerturbSpec,
    #[serde(default)]
    pub switch: SwitchSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    /// Stop once `||X X^T - M*||_F` falls to this value; 0 never stops early.
    #[serde(default)]
    pub tol_error: f64,
    /// Error level counted as reached in `iterations_to_target`.
    #[serde(default = "defaults::target_error")]
    pub target_error: f64,
    pub seeds: Vec<u64>,
    /// Certify every this many iterations; 0 turns certification off.
    #[serde(default = "defaults::certify_every")]
    pub certify_every: usize,
    /// Use the local-norm certificate instead of the Euclidean one.
    #[serde(default)]
    pub certify_local: bool,
    /// Power-iteration budget per Hessian eigenvalue estimate.
    #[serde(default = "defaults::eig_max_iters")]
    pub eig_max_iters: usize,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn eta_fixed() -> f64 {
        1e-2
    }
    pub fn beta() -> f64 {
        1e-3
    }
    pub fn period() -> usize {
        100
    }
    pub fn eps_threshold() -> f64 {
        1e-6
    }
    pub fn switch_eps() -> f64 {
        1e-3
    }
    pub fn max_iters() -> usize {
        1000
    }
    pub fn target_error() -> f64 {
        1e-10
    }
    pub fn certify_every() -> usize {
        10
    }
    pub fn eig_max_iters() -> usize {
        300
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("results")
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::config(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validated()
    }

    /// Checks invariants and fills defaults that depend on other fields.
    pub fn validated(mut self) -> Result<Self> {
        if self.n == 0 {
            return Err(HarnessError::config("n", "must be at least 1"));
        }
        if self.r_star == 0 {
            return Err(HarnessError::config("r_star", "must be at least 1"));
        }
        if self.r < self.r_star {
            return Err(HarnessError::config(
                "r",
                format!("search rank r = {} is below r_star = {}", self.r, self.r_star),
            ));
        }
        if self.r > self.n {
            return Err(HarnessError::config("r", format!("r = {} exceeds n = {}", self.r, self.n)));
        }
        match (&self.kappa, &self.spectrum) {
            (Some(_), Some(_)) => return Err(HarnessError::config("spectrum", "give either kappa or spectrum, not both")),
            (None, None) => return Err(HarnessError::config("kappa", "one of kappa or spectrum is required")),
            (Some(k), None) => {
                if !(k.is_finite() && *k >= 1.0) {
                    return Err(HarnessError::config("kappa", format!("must be a finite value >= 1, got {k}")));
                }
            }
            (None, Some(s)) => {
                if s.len() != self.r_star {
                    return Err(HarnessError::config(
                        "spectrum",
                        format!("has {} entries, expected r_star = {}", s.len(), self.r_star),
                    ));
                }
                for &v in s {
                    positive("spectrum", v)?;
                }
                if s.windows(2).any(|w| w[1] > w[0]) {
                    return Err(HarnessError::config("spectrum", "must be nonincreasing"));
                }
            }
        }
        if self.problem.uses_measurements() {
            match self.m {
                Some(0) => return Err(HarnessError::config("m", "must be at least 1")),
                Some(_) => {}
                None => self.m = Some(precgd::problems::default_measurements(self.n, self.r)),
            }
        } else if self.m.is_some() {
            return Err(HarnessError::config("m", "one_bit observes every entry and takes no m"));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::config("methods", "must list at least one method"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(HarnessError::config("methods", format!("{} listed twice", m.as_str())));
            }
            let a = self
                .alpha
                .get(*m)
                .ok_or_else(|| HarnessError::config(format!("alpha.{}", m.as_str()), "missing step size"))?;
            positive(&format!("alpha.{}", m.as_str()), a)?;
        }
        if let EtaModeSpec::Fixed(e) = self.eta_mode {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(HarnessError::config("eta_mode.fixed", "must be nonnegative and finite"));
            }
        }
        let p = &self.perturb;
        positive("perturb.eta_fixed", p.eta_fixed)?;
        positive("perturb.beta", p.beta)?;
        positive("perturb.eps_threshold", p.eps_threshold)?;
        if p.period == 0 {
            return Err(HarnessError::config("perturb.period", "must be at least 1"));
        }
        let s = &self.switch;
        positive("switch.eps_g", s.eps_g)?;
        positive("switch.eps_h", s.eps_h)?;
        positive("switch.rho", s.rho)?;
        if let Some(a) = s.local_alpha {
            positive("switch.local_alpha", a)?;
        }
        match self.init {
            InitSpec::NearTruth { radius } => {
                if !(radius >= 0.0 && radius.is_finite()) {
                    return Err(HarnessError::config("init.near_truth.radius", "must be nonnegative and finite"));
                }
            }
            InitSpec::Random { scale } => positive("init.random.scale", scale)?,
        }
        if self.max_iters == 0 {
            return Err(HarnessError::config("max_iters", "must be at least 1"));
        }
        if !(self.tol_error >= 0.0 && self.tol_error.is_finite()) {
            return Err(HarnessError::config("tol_error", "must be nonnegative and finite"));
        }
        positive("target_error", self.target_error)?;
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds", "must list at least one seed"));
        }
        if self.eig_max_iters == 0 {
            return Err(HarnessError::config("eig_max_iters", "must be at least 1"));
        }
        Ok(self)
    }

    /// `m` after defaults; `None` for one-bit.
    pub fn measurements(&self) -> Option<usize> {
        self.m
    }

    pub fn alpha_for(&self, m: MethodName) -> f64 {
        self.alpha.get(m).expect("validated config has every alpha")
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
        field: "<file>".into(),
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    ExperimentConfig::from_json(&text)
}
