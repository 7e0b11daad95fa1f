//! Binary replay files for a ground truth and its sensing operator.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! ```text
//! magic   8 bytes  "PRECGDP1"
//! n, r_star, m, gt_seed, op_seed
//! spectrum          r_star values
//! Z                 n x r_star, row-major
//! A_1 ... A_m       n x n each, row-major (symmetric parts)
//! ```
//!
//! `m = 0` stores a ground truth without an operator.

use super::{GroundTruth, SensingOperator};
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DMatrix;
use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"PRECGDP1";

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    Ok(f64::from_le_bytes(b))
}

fn put_row_major<T: Real>(w: &mut impl Write, m: &DMatrix<T>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            put_f64(w, m[(i, j)].to_f64_lossy())?;
        }
    }
    Ok(())
}

fn get_row_major<T: Real>(r: &mut impl Read, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    let mut vals = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        vals.push(T::lit(get_f64(r)?));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}

pub fn write_problem<T: Real>(
    w: &mut impl Write,
    gt: &GroundTruth<T>,
    op: Option<&SensingOperator<T>>,
) -> Result<()> {
    if let Some(op) = op {
        if op.n() != gt.n() {
            return Err(Error::shape("sensing operator", (gt.n(), gt.n()), (op.n(), op.n())));
        }
    }
    w.write_all(MAGIC)?;
    put_u64(w, gt.n() as u64)?;
    put_u64(w, gt.r_star() as u64)?;
    put_u64(w, op.map_or(0, |o| o.m()) as u64)?;
    put_u64(w, gt.seed())?;
    put_u64(w, op.map_or(0, |o| o.seed()))?;
    for &l in gt.spectrum() {
        put_f64(w, l.to_f64_lossy())?;
    }
    put_row_major(w, gt.z())?;
    if let Some(op) = op {
        for i in 0..op.m() {
            put_row_major(w, &op.matrix(i))?;
        }
    }
    Ok(())
}

pub fn read_problem<T: Real>(r: &mut impl Read) -> Result<(GroundTruth<T>, Option<SensingOperator<T>>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let n = get_u64(r)? as usize;
    let r_star = get_u64(r)? as usize;
    let m = get_u64(r)? as usize;
    let gt_seed = get_u64(r)?;
    let op_seed = get_u64(r)?;
    if n == 0 || r_star == 0 || r_star > n {
        return Err(Error::Format(format!("inconsistent header n={n} r_star={r_star}")));
    }
    let mut spectrum = Vec::with_capacity(r_star);
    for _ in 0..r_star {
        spectrum.push(get_f64(r)?);
    }
    let z: DMatrix<T> = get_row_major(r, n, r_star)?;
    let gt = GroundTruth::from_factor(z, gt_seed)?;
    let op = if m > 0 {
        let mut mats = Vec::with_capacity(m);
        for _ in 0..m {
            mats.push(get_row_major(r, n, n)?);
        }
        Some(SensingOperator::from_matrices(n, op_seed, &mats)?)
    } else {
        None
    };
    Ok((gt, op))
}
