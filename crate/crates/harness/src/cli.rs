//! Command-line front end. Exit codes: 0 success, 1 config error, 2 runtime error.

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{build_instance, certifier};
use crate::summary::CertificateRecord;
use crate::{matrix_file, run_experiment};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "precgd", version, about = "Preconditioned gradient descent experiments and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (method, seed) pair of a config and write traces and a summary.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated seeds overriding `seeds` from the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Suppress the summary table.
        #[arg(long)]
        quiet: bool,
    },
    /// Certify a factor against the first seed's instance of a config.
    Certify {
        config: PathBuf,
        /// Matrix file: header `n r`, then n rows of r doubles.
        #[arg(long)]
        factor: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct CertifyOutput {
    problem: &'static str,
    seed: u64,
    n: usize,
    r: usize,
    f: f64,
    f_gap: Option<f64>,
    err_fro: f64,
    certificate: CertificateRecord,
}

fn certify(cfg: &ExperimentConfig, factor: &std::path::Path) -> Result<CertifyOutput> {
    let seed = cfg.seeds[0];
    let inst = build_instance(cfg, seed)?;
    let x = matrix_file::read_factor(factor)?;
    if x.n() != cfg.n {
        return Err(HarnessError::MatrixFile {
            path: factor.display().to_string(),
            reason: format!("factor has {} rows, the config has n = {}", x.n(), cfg.n),
        });
    }
    let model = inst.model.as_ref();
    let (f, g) = model.factored_eval(x.as_matrix());
    let mut cert = certifier(cfg, &inst, seed)?;
    let report = if cfg.certify_local {
        let eta = precgd::eta_adaptive(model, &x)?;
        cert.local(model, &x, &g, eta)?
    } else {
        cert.euclidean(model, &x, &g)?
    };
    Ok(CertifyOutput {
        problem: cfg.problem.as_str(),
        seed,
        n: x.n(),
        r: x.r(),
        f,
        f_gap: model.factored_gap(x.as_matrix(), f),
        err_fro: x.error_fro(&inst.gt.m_star()),
        certificate: CertificateRecord::from(&report),
    })
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            output_dir,
            seeds,
            quiet,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            let cfg = cfg.validated()?;
            let out = run_experiment(&cfg, quiet)?;
            if !quiet {
                println!("summary: {}", out.summary_path.display());
            }
            if out.summary.has_errors() {
                return Err(HarnessError::Io {
                    path: out.summary_path.display().to_string(),
                    reason: "some runs failed; see the error fields".into(),
                });
            }
            Ok(())
        }
        Command::Certify { config, factor } => {
            let cfg = parse_config(&config)?;
            let out = certify(&cfg, &factor)?;
            let text = serde_json::to_string_pretty(&out).map_err(|e| HarnessError::Io {
                path: "<stdout>".into(),
                reason: e.to_string(),
            })?;
            println!("{text}");
            Ok(())
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
