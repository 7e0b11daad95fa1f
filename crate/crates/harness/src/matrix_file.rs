//! Plain-text factor files: a header line `n r`, then `n` rows of `r`
//! whitespace-separated doubles.

use crate::error::{HarnessError, Result};
use precgd::Factor;
use std::fmt::Write as _;
use std::path::Path;

pub fn format_factor(x: &Factor<f64>) -> String {
    let m = x.as_matrix();
    let mut out = format!("{} {}\n", x.n(), x.r());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

pub fn write_factor(path: &Path, x: &Factor<f64>) -> Result<()> {
    std::fs::write(path, format_factor(x)).map_err(|e| HarnessError::io(path, e))
}

/// Parses a factor file. `origin` only labels error messages.
pub fn parse_factor(text: &str, origin: &str) -> Result<Factor<f64>> {
    let bad = |reason: String| HarnessError::MatrixFile {
        path: origin.to_string(),
        reason,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [n, r] = dims[..] else {
        return Err(bad(format!("header must be `n r`, got `{header}`")));
    };
    let parse_dim = |s: &str, name: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| bad(format!("header {name} must be a positive integer, got `{s}`")))
    };
    let (n, r) = (parse_dim(n, "n")?, parse_dim(r, "r")?);
    let mut values = Vec::with_capacity(n * r);
    let mut rows = 0;
    for (lineno, line) in lines {
        rows += 1;
        if rows > n {
            return Err(bad(format!("more than n = {n} rows (line {})", lineno + 1)));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| bad(format!("line {}: `{tok}` is not a number", lineno + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("line {}: non-finite entry", lineno + 1)));
            }
            values.push(v);
        }
        if values.len() - before != r {
            return Err(bad(format!(
                "line {}: expected {r} entries, found {}",
                lineno + 1,
                values.len() - before
            )));
        }
    }
    if rows != n {
        return Err(bad(format!("expected {n} rows, found {rows}")));
    }
    Factor::from_row_slice(n, r, &values).map_err(|e| bad(e.to_string()))
}

pub fn read_factor(path: &Path) -> Result<Factor<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_factor(&text, &path.display().to_string())
}
