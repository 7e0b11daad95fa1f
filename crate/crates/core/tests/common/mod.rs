#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use precgd::problems::{sigmoid, OneBit, PhaseRetrieval};
use precgd::{Factor, MatrixSensing};

/// Column-major position of entry (i, k) of an n x r matrix.
fn at(n: usize, i: usize, k: usize) -> usize {
    k * n + i
}

/// Dense Hessian of `f(X) = sum_i (<S_i, X X^T> - b_i)^2` for symmetric `S_i`:
/// `sum_i 8 vec(S_i X) vec(S_i X)^T + 4 r_i (I_r kron S_i)`.
pub fn dense_hessian_quadratic(mats: &[DMatrix<f64>], b: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = x.shape();
    let xxt = x * x.transpose();
    let mut h = DMatrix::<f64>::zeros(n * r, n * r);
    for (s, &bi) in mats.iter().zip(b) {
        let res = s.dot(&xxt) - bi;
        let g = DVector::from_column_slice((s * x).as_slice());
        h += &g * g.transpose() * 8.0;
        for k in 0..r {
            for i in 0..n {
                for j in 0..n {
                    h[(at(n, i, k), at(n, j, k))] += 4.0 * res * s[(i, j)];
                }
            }
        }
    }
    h
}

/// Dense Hessian of `f(X) = sum_ij psi_ij((X X^T)_ij)` built entry by entry,
/// with `psi'' = sigma'` and `psi' = sigma - alpha`.
pub fn dense_hessian_one_bit(alpha: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = x.shape();
    let m = x * x.transpose();
    let mut h = DMatrix::<f64>::zeros(n * r, n * r);
    for i in 0..n {
        for j in 0..n {
            let s = sigmoid(m[(i, j)]);
            let d1 = s - alpha[(i, j)];
            let d2 = s * (1.0 - s);
            // dM_ij / dX_{pk}
            let mut d = DVector::<f64>::zeros(n * r);
            for k in 0..r {
                d[at(n, i, k)] += x[(j, k)];
                d[at(n, j, k)] += x[(i, k)];
            }
            h += &d * d.transpose() * d2;
            for k in 0..r {
                h[(at(n, i, k), at(n, j, k))] += d1;
                h[(at(n, j, k), at(n, i, k))] += d1;
            }
        }
    }
    h
}

pub fn dense_hessian_sensing(model: &MatrixSensing<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let op = model.operator();
    let mats: Vec<_> = (0..op.m()).map(|i| op.matrix(i)).collect();
    dense_hessian_quadratic(&mats, model.measurements().as_slice(), x)
}

pub fn dense_hessian_phase(model: &PhaseRetrieval<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let a = model.measurement_vectors();
    let mats: Vec<_> = a
        .row_iter()
        .map(|row| row.transpose() * row)
        .collect();
    dense_hessian_quadratic(&mats, model.observations().as_slice(), x)
}

pub fn dense_hessian_one_bit_model(model: &OneBit<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    dense_hessian_one_bit(model.alpha(), x)
}

pub fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.min()
}

pub fn sorted_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// `V P^s` for symmetric positive semidefinite `P` via a dense eigendecomposition.
pub fn right_power(v: &DMatrix<f64>, p: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(s)));
    v * (&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

pub fn factor(m: DMatrix<f64>) -> Factor<f64> {
    Factor::new(m).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
