//! Machine-readable run summary and the human-readable table.

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use precgd::CertificateReport;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SUMMARY_FILE: &str = "summary.json";

/// Floats are written in scientific notation with round-trip precision;
/// non-finite values become `null`.
mod sci {
    use serde::{Serialize, Serializer};
    use serde_json::value::RawValue;

    pub fn raw(v: f64) -> Option<Box<RawValue>> {
        v.is_finite()
            .then(|| RawValue::from_string(format!("{v:e}")).expect("formatted float is valid JSON"))
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        raw(*v).serialize(s)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.and_then(raw).serialize(s)
        }
    }
}

/// A certificate report with every field of the library type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    #[serde(serialize_with = "sci::serialize")]
    pub eps_g: f64,
    #[serde(serialize_with = "sci::serialize")]
    pub eps_h: f64,
    #[serde(serialize_with = "sci::serialize")]
    pub eps_lambda: f64,
    #[serde(serialize_with = "sci::serialize")]
    pub c_g: f64,
    #[serde(serialize_with = "sci::serialize")]
    pub c_h: f64,
    #[serde(serialize_with = "sci::serialize")]
    pub c_lambda: f64,
    #[serde(serialize_with = "sci::opt::serialize")]
    pub eta: Option<f64>,
    #[serde(serialize_with = "sci::serialize")]
    pub bound: f64,
    pub verdict: String,
    #[serde(serialize_with = "sci::serialize")]
    pub lambda_min_estimate: f64,
    pub power_iters_used: usize,
    pub eig_converged: bool,
}

impl From<&CertificateReport<f64>> for CertificateRecord {
    fn from(c: &CertificateReport<f64>) -> Self {
        Self {
            eps_g: c.eps_g,
            eps_h: c.eps_h,
            eps_lambda: c.eps_lambda,
            c_g: c.c_g,
            c_h: c.c_h,
            c_lambda: c.c_lambda,
            eta: c.eta,
            bound: c.bound,
            verdict: c.verdict.as_str().to_string(),
            lambda_min_estimate: c.lambda_min_estimate,
            power_iters_used: c.power_iters_used,
            eig_converged: c.eig_converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    /// File name relative to the output directory; absent when the run failed to start.
    pub trace_file: Option<String>,
    pub x0_sha256: String,
    pub iterations: usize,
    pub termination: String,
    #[serde(serialize_with = "sci::opt::serialize")]
    pub final_err_fro: Option<f64>,
    #[serde(serialize_with = "sci::opt::serialize")]
    pub final_f: Option<f64>,
    #[serde(serialize_with = "sci::opt::serialize")]
    pub final_f_gap: Option<f64>,
    pub iterations_to_target: Option<usize>,
    /// Fitted slope of log10 error per iteration.
    #[serde(serialize_with = "sci::opt::serialize")]
    pub rate_slope: Option<f64>,
    pub switch_iteration: Option<usize>,
    pub perturbations: usize,
    pub certified_iterates: usize,
    pub final_certificate: Option<CertificateRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub version: String,
    pub rng: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn new(config: ExperimentConfig, runs: Vec<RunSummary>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: precgd::rng::RNG_DESCRIPTION.to_string(),
            config,
            runs,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| HarnessError::Io {
                path: SUMMARY_FILE.into(),
                reason: e.to_string(),
            })
    }

    /// True when some run failed for a reason other than divergence.
    pub fn has_errors(&self) -> bool {
        self.runs.iter().any(|r| r.error.is_some())
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

pub fn summary_table(s: &ExperimentSummary) -> String {
    let mut out = format!(
        "{:<10} {:>6} {:>7} {:>11} {:>11} {:>10} {:>8} {:<12} {}\n",
        "method", "seed", "iters", "err_fro", "f_gap", "slope", "target", "termination", "verdict"
    );
    for r in &s.runs {
        let verdict = r.final_certificate.as_ref().map_or("-", |c| c.verdict.as_str());
        let target = r.iterations_to_target.map_or_else(|| "-".into(), |k| k.to_string());
        out += &format!(
            "{:<10} {:>6} {:>7} {:>11} {:>11} {:>10} {:>8} {:<12} {}\n",
            r.method,
            r.seed,
            r.iterations,
            cell(r.final_err_fro),
            cell(r.final_f_gap),
            r.rate_slope.map_or_else(|| "-".into(), |v| format!("{v:.2e}")),
            target,
            r.termination,
            verdict
        );
        if let Some(e) = &r.error {
            out += &format!("  error: {e}\n");
        }
    }
    out
}

/// Writes `summary.json` into `dir` and prints the table unless `quiet`.
pub fn emit_summary(s: &ExperimentSummary, dir: &Path, quiet: bool) -> Result<PathBuf> {
    let path = dir.join(SUMMARY_FILE);
    std::fs::write(&path, s.to_json()?).map_err(|e| HarnessError::io(&path, e))?;
    if !quiet {
        print!("{}", summary_table(s));
    }
    Ok(path)
}
