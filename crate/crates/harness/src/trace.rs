//! Per-run CSV traces and their schema.

use crate::error::{HarnessError, Result};
use precgd::optimizers::IterateRecord;
use std::path::Path;

/// Column names, in file order.
pub const COLUMNS: [&str; 14] = [
    "k",
    "f",
    "f_gap",
    "err_fro",
    "eta",
    "grad_fro",
    "dual_grad",
    "lambda_min_gram",
    "eps_g",
    "eps_H",
    "eps_lambda",
    "cert_bound",
    "perturbed",
    "phase",
];

/// Shortest representation that parses back to the same double.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn record_row(rec: &IterateRecord<f64>) -> [String; 14] {
    let cert = rec.certificate.as_ref();
    [
        rec.k.to_string(),
        num(rec.f_value),
        opt(rec.f_gap),
        opt(rec.error_fro),
        opt(rec.eta_used),
        num(rec.grad_fro),
        num(rec.dual_grad_norm),
        num(rec.lambda_min_gram),
        opt(cert.map(|c| c.eps_g)),
        opt(cert.map(|c| c.eps_h)),
        opt(cert.map(|c| c.eps_lambda)),
        opt(cert.map(|c| c.bound)),
        u8::from(rec.perturbed).to_string(),
        rec.phase.as_str().to_string(),
    ]
}

pub fn render(trace: &[IterateRecord<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_err = |e: csv::Error| HarnessError::Io {
        path: "<csv buffer>".into(),
        reason: e.to_string(),
    };
    w.write_record(COLUMNS).map_err(to_err)?;
    for rec in trace {
        w.write_record(record_row(rec)).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io {
        path: "<csv buffer>".into(),
        reason: e.to_string(),
    })
}

pub fn write_trace(path: &Path, trace: &[IterateRecord<f64>]) -> Result<()> {
    std::fs::write(path, render(trace)?).map_err(|e| HarnessError::io(path, e))
}

/// A schema violation, with the 1-based line it was found on (0 for the whole file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Checks a trace file against the schema: exact header, one row per
/// iteration numbered from 0, numeric cells where numbers belong, the four
/// certificate cells either all present or all empty, and a trailing newline.
/// Returns the number of data rows.
pub fn validate_trace(bytes: &[u8]) -> std::result::Result<usize, SchemaViolation> {
    let fail = |line: usize, reason: String| SchemaViolation { line, reason };
    let text = std::str::from_utf8(bytes).map_err(|e| fail(0, format!("not UTF-8: {e}")))?;
    if !text.ends_with('\n') {
        return Err(fail(0, "missing trailing newline".into()));
    }
    if text.contains('\r') {
        return Err(fail(0, "carriage return in file".into()));
    }
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fail(1, "missing header".into()))?;
    if header != COLUMNS.join(",") {
        return Err(fail(1, format!("header `{header}` does not match the schema")));
    }
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != COLUMNS.len() {
            return Err(fail(lineno, format!("{} cells, expected {}", cells.len(), COLUMNS.len())));
        }
        let k: usize = cells[0]
            .parse()
            .map_err(|_| fail(lineno, format!("k `{}` is not an integer", cells[0])))?;
        if k != rows {
            return Err(fail(lineno, format!("k = {k}, expected {rows}")));
        }
        for (j, cell) in cells.iter().enumerate().take(12).skip(1) {
            let required = matches!(COLUMNS[j], "f" | "grad_fro" | "dual_grad" | "lambda_min_gram");
            if cell.is_empty() {
                if required {
                    return Err(fail(lineno, format!("{} is required", COLUMNS[j])));
                }
                continue;
            }
            if cell.parse::<f64>().is_err() {
                return Err(fail(lineno, format!("{} `{cell}` is not a number", COLUMNS[j])));
            }
        }
        let cert_present = cells[8..12].iter().filter(|c| !c.is_empty()).count();
        if cert_present != 0 && cert_present != 4 {
            return Err(fail(lineno, "certificate cells must be all present or all empty".into()));
        }
        if !matches!(cells[12], "0" | "1") {
            return Err(fail(lineno, format!("perturbed `{}` must be 0 or 1", cells[12])));
        }
        if !matches!(cells[13], "global" | "local") {
            return Err(fail(lineno, format!("phase `{}` must be global or local", cells[13])));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(fail(0, "no data rows".into()));
    }
    Ok(rows)
}

pub fn validate_trace_file(path: &Path) -> Result<usize> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    validate_trace(&bytes).map_err(|v| HarnessError::Io {
        path: path.display().to_string(),
        reason: format!("trace schema violation at {v}"),
    })
}
