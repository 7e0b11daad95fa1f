//! Builds problem instances from a config, runs every (method, seed) pair and
//! writes traces plus a summary.

use crate::config::{ExperimentConfig, InitSpec, MethodName, ProblemKind};
use crate::error::{HarnessError, Result};
use crate::{metrics, summary, trace};
use precgd::optimizers::{CertifyOptions, SolverOptions, SolverState, StepConfig, SwitchConfig};
use precgd::problems::{init_near_truth, matrix_sensing_model, one_bit_model, phase_retrieval_model, random_init};
use precgd::{CertificateInputs, Certifier, ConvexCost, EigConfig, Factor, GroundTruth};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub use summary::{emit_summary, CertificateRecord, ExperimentSummary, RunSummary};

/// The ground truth and cost function for one seed.
pub struct Instance {
    pub gt: GroundTruth<f64>,
    pub model: Box<dyn ConvexCost<f64>>,
}

pub fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    let gt = match (&cfg.spectrum, cfg.kappa) {
        (Some(s), _) => GroundTruth::generate(cfg.n, s, seed)?,
        (None, Some(k)) => GroundTruth::generate_with_kappa(cfg.n, cfg.r_star, k, seed)?,
        (None, None) => return Err(HarnessError::config("kappa", "one of kappa or spectrum is required")),
    };
    let m = || {
        cfg.measurements()
            .ok_or_else(|| HarnessError::config("m", "missing; validate the config first"))
    };
    let model: Box<dyn ConvexCost<f64>> = match cfg.problem {
        ProblemKind::MatrixSensing => Box::new(matrix_sensing_model(&gt, m()?, seed)?),
        ProblemKind::OneBit => Box::new(one_bit_model(&gt)),
        ProblemKind::PhaseRetrieval => Box::new(phase_retrieval_model(&gt, m()?, seed)?),
    };
    Ok(Instance { gt, model })
}

pub fn initial_point(cfg: &ExperimentConfig, gt: &GroundTruth<f64>, seed: u64) -> Result<Factor<f64>> {
    Ok(match cfg.init {
        InitSpec::NearTruth { radius } => init_near_truth(gt, cfg.r, radius, seed)?,
        InitSpec::Random { scale } => random_init(cfg.n, cfg.r, scale, seed)?,
    })
}

/// SHA-256 of the column-major little-endian bytes of `X`.
pub fn factor_hash(x: &Factor<f64>) -> String {
    let mut h = Sha256::new();
    h.update((x.n() as u64).to_le_bytes());
    h.update((x.r() as u64).to_le_bytes());
    for v in x.as_matrix().iter() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn eig_config(cfg: &ExperimentConfig, seed: u64) -> EigConfig<f64> {
    EigConfig {
        max_iters: cfg.eig_max_iters,
        seed,
        ..EigConfig::default()
    }
}

pub fn certifier(cfg: &ExperimentConfig, inst: &Instance, seed: u64) -> Result<Certifier<f64>> {
    let mut inputs = CertificateInputs::for_model(inst.model.as_ref(), Some(inst.gt.trace()));
    inputs.lambda_rstar = Some(inst.gt.lambda_r_star());
    Ok(Certifier::new(inputs, eig_config(cfg, seed))?)
}

pub fn solver_options(
    cfg: &ExperimentConfig,
    method: MethodName,
    inst: &Instance,
    seed: u64,
) -> Result<SolverOptions<f64>> {
    let mut step = StepConfig::new(cfg.alpha_for(method));
    step.eta_mode = cfg.eta_mode.mode();
    step.max_iters = cfg.max_iters;
    step.tol_error = cfg.tol_error;
    let mut opts = SolverOptions::new(method.method(), step);
    opts.m_star = Some(inst.gt.m_star());
    opts.perturb = Some(cfg.perturb.config(seed));
    if method == MethodName::TwoPhase {
        opts.switch = Some(SwitchConfig {
            thresholds: precgd::certify::StationarityThresholds {
                eps_g: cfg.switch.eps_g,
                eps_h: cfg.switch.eps_h,
                rho: cfg.switch.rho,
            },
            eig: eig_config(cfg, seed),
            local_alpha: cfg.switch.local_alpha,
        });
    }
    if cfg.certify_every > 0 {
        opts.certify = Some(CertifyOptions {
            every: cfg.certify_every,
            local: cfg.certify_local,
            certifier: certifier(cfg, inst, seed)?,
        });
    }
    Ok(opts)
}

pub fn trace_file_name(method: MethodName, seed: u64) -> String {
    format!("{}_seed{seed}.csv", method.as_str())
}

/// Fails before any solver runs if `dir` cannot be created or written.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| HarnessError::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| HarnessError::io(&probe, e))
}

fn summarize_run(
    cfg: &ExperimentConfig,
    method: MethodName,
    seed: u64,
    x0_sha256: &str,
    outcome: std::result::Result<&SolverState<f64>, String>,
    trace_file: Option<String>,
) -> RunSummary {
    let base = RunSummary {
        method: method.as_str().to_string(),
        seed,
        trace_file,
        x0_sha256: x0_sha256.to_string(),
        iterations: 0,
        termination: "error".into(),
        final_err_fro: None,
        final_f: None,
        final_f_gap: None,
        iterations_to_target: None,
        rate_slope: None,
        switch_iteration: None,
        perturbations: 0,
        certified_iterates: 0,
        final_certificate: None,
        error: None,
    };
    let st = match outcome {
        Ok(st) => st,
        Err(e) => return RunSummary { error: Some(e), ..base },
    };
    let errs: Vec<f64> = st.trace.iter().filter_map(|r| r.error_fro).collect();
    let last = st.trace.last();
    let final_cert = st.trace.iter().rev().find_map(|r| r.certificate.as_ref());
    RunSummary {
        iterations: st.k,
        termination: st.termination.as_str().to_string(),
        final_err_fro: last.and_then(|r| r.error_fro),
        final_f: last.map(|r| r.f_value),
        final_f_gap: last.and_then(|r| r.f_gap),
        iterations_to_target: metrics::iterations_to_target(&errs, cfg.target_error),
        rate_slope: metrics::rate_slope(&errs, cfg.target_error),
        switch_iteration: st.switch_iteration,
        perturbations: st.trace.iter().filter(|r| r.perturbed).count(),
        certified_iterates: st.trace.iter().filter(|r| r.certificate.is_some()).count(),
        final_certificate: final_cert.map(CertificateRecord::from),
        ..base
    }
}

/// Runs `method` from `x0` with the options `cfg` resolves to.
pub fn run_method(
    cfg: &ExperimentConfig,
    inst: &Instance,
    x0: &Factor<f64>,
    method: MethodName,
    seed: u64,
) -> Result<SolverState<f64>> {
    let opts = solver_options(cfg, method, inst, seed)?;
    Ok(precgd::run_solver(inst.model.as_ref(), x0, opts)?)
}

/// One (method, seed) run: solve, write the trace, summarize.
fn run_one(
    cfg: &ExperimentConfig,
    inst: &Instance,
    x0: &Factor<f64>,
    x0_sha256: &str,
    method: MethodName,
    seed: u64,
    out_dir: &Path,
) -> Result<(RunSummary, Option<PathBuf>)> {
    match run_method(cfg, inst, x0, method, seed) {
        Ok(st) => {
            let name = trace_file_name(method, seed);
            let path = out_dir.join(&name);
            trace::write_trace(&path, &st.trace)?;
            Ok((summarize_run(cfg, method, seed, x0_sha256, Ok(&st), Some(name)), Some(path)))
        }
        // a failing run is recorded and does not stop its siblings
        Err(e) => Ok((summarize_run(cfg, method, seed, x0_sha256, Err(e.to_string()), None), None)),
    }
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub trace_files: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: ExperimentSummary,
}

/// Runs the experiment and writes `summary.json` next to the traces. Methods
/// of one seed share the model and `X0` and run concurrently.
pub fn run_experiment(cfg: &ExperimentConfig, quiet: bool) -> Result<ExperimentOutput> {
    let out_dir = cfg.output_dir.clone();
    ensure_writable(&out_dir)?;
    let mut runs = Vec::new();
    let mut trace_files = Vec::new();
    for &seed in &cfg.seeds {
        let inst = build_instance(cfg, seed)?;
        let x0 = initial_point(cfg, &inst.gt, seed)?;
        let hash = factor_hash(&x0);
        let results: Vec<Result<(RunSummary, Option<PathBuf>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .methods
                .iter()
                .map(|&method| {
                    let (inst, x0, hash, out_dir) = (&inst, &x0, &hash, &out_dir);
                    s.spawn(move || run_one(cfg, inst, x0, hash, method, seed, out_dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect()
        });
        for res in results {
            let (run, path) = res?;
            runs.push(run);
            trace_files.extend(path);
        }
    }
    let summary = ExperimentSummary::new(cfg.clone(), runs);
    let summary_path = emit_summary(&summary, &out_dir, quiet)?;
    Ok(ExperimentOutput {
        trace_files,
        summary_path,
        summary,
    })
}
