//! Small dense helpers for r x r symmetric matrices and n x r blocks.

use crate::scalar::{lit, Real};
use nalgebra::{DMatrix, SymmetricEigen};

/// Relative cutoff on singular values below which a factor is treated as rank deficient.
pub const PINV_SINGULAR_CUTOFF: f64 = 1e-12;

/// Frobenius inner product `<A, B> = tr(A^T B)`.
#[inline]
pub fn inner<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.dot(b)
}

/// `(A + A^T) / 2`.
pub fn sym<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * lit::<T>(0.5)
}

/// `X V^T + V X^T`.
pub fn sym_outer<T: Real>(x: &DMatrix<T>, v: &DMatrix<T>) -> DMatrix<T> {
    let xv = x * v.transpose();
    &xv + xv.transpose()
}

/// Eigendecomposition of a small symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig<T: Real> {
    pub values: Vec<T>,
    pub vectors: DMatrix<T>,
}

impl<T: Real> SymEig<T> {
    pub fn new(a: &DMatrix<T>) -> Self {
        let eig = SymmetricEigen::new(sym(a));
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| {
            eig.eigenvalues[i]
                .partial_cmp(&eig.eigenvalues[j])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let n = a.nrows();
        let mut vectors = DMatrix::zeros(n, n);
        let mut values = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            values.push(eig.eigenvalues[src]);
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        *self.values.last().unwrap()
    }

    /// `Q diag(g(lambda)) Q^T`.
    pub fn map(&self, g: impl Fn(T) -> T) -> DMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = g(lam);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.vectors.transpose()
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min<T: Real>(a: &DMatrix<T>) -> T {
    SymEig::new(a).min()
}

/// Modified Gram-Schmidt on the columns of a (possibly tall) block, in place.
///
/// Columns that collapse numerically are replaced by a fresh unit vector
/// orthogonal to the previous ones.
pub fn orthonormalize_columns<T: Real>(block: &mut [DMatrix<T>]) {
    for j in 0..block.len() {
        for _pass in 0..2 {
            for i in 0..j {
                let (head, tail) = block.split_at_mut(j);
                let c = inner(&head[i], &tail[0]);
                tail[0] -= &head[i] * c;
            }
        }
        let nrm = block[j].norm();
        if nrm > lit(1e-300) && nrm.is_finite() {
            block[j].unscale_mut(nrm);
        } else {
            // deterministic fallback: first coordinate direction not in the span
            let shape = block[j].shape();
            'outer: for idx in 0..shape.0 * shape.1 {
                let mut e = DMatrix::zeros(shape.0, shape.1);
                e[idx] = T::one();
                for i in 0..j {
                    let c = inner(&block[i], &e);
                    e -= &block[i] * c;
                }
                let nrm = e.norm();
                if nrm > lit(1e-6) {
                    block[j] = e / nrm;
                    break 'outer;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_eig_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let e = SymEig::new(&a);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = e.map(|l| l);
        assert!((back - &a).norm() < 1e-12);
        let inv = e.map(|l| 1.0 / l);
        assert!((inv * &a - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn gram_schmidt_orthonormal() {
        let mut blk = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 6.0, 8.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        ];
        orthonormalize_columns(&mut blk);
        for i in 0..3 {
            for j in 0..3 {
                let d = inner(&blk[i], &blk[j]);
                let want: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12, "{i},{j}: {d}");
            }
        }
    }
}
