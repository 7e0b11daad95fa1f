//! The n x r factor `X` of `M = X X^T`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DMatrix;
use std::ops::Deref;

/// Dense real n x r factor with `1 <= r <= n` and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor<T: Real> {
    data: DMatrix<T>,
}

impl<T: Real> Factor<T> {
    /// Validates shape and finiteness.
    pub fn new(data: DMatrix<T>) -> Result<Self> {
        let (n, r) = data.shape();
        if n == 0 || r == 0 {
            return Err(Error::param("factor", format!("empty factor {n}x{r}")));
        }
        if r > n {
            return Err(Error::param(
                "factor",
                format!("search rank r={r} exceeds ambient dimension n={n}"),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "factor entries",
                iteration: None,
            });
        }
        Ok(Self { data })
    }

    /// All-zero factor.
    pub fn zeros(n: usize, r: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(n, r))
    }

    /// Row-major constructor, handy in tests and file readers.
    pub fn from_row_slice(n: usize, r: usize, values: &[T]) -> Result<Self> {
        if values.len() != n * r {
            return Err(Error::Shape {
                context: "factor from_row_slice",
                expected: format!("{} values", n * r),
                got: format!("{} values", values.len()),
            });
        }
        Self::new(DMatrix::from_row_slice(n, r, values))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn r(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.data
    }

    /// `X X^T`, the n x n matrix the factor represents.
    pub fn outer(&self) -> DMatrix<T> {
        &self.data * self.data.transpose()
    }

    /// `X^T X`, the r x r Gram matrix.
    pub fn gram(&self) -> DMatrix<T> {
        self.data.tr_mul(&self.data)
    }

    /// `||X X^T - M||_F`.
    pub fn error_fro(&self, target: &DMatrix<T>) -> T {
        (self.outer() - target).norm()
    }

    /// Checks that a direction has the same shape as this factor.
    pub fn check_direction(&self, v: &DMatrix<T>, context: &'static str) -> Result<()> {
        if v.shape() != self.data.shape() {
            return Err(Error::shape(context, self.data.shape(), v.shape()));
        }
        Ok(())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Factor<U> {
        Factor {
            data: self.data.map(|v| U::lit(v.to_f64_lossy())),
        }
    }
}

impl<T: Real> Deref for Factor<T> {
    type Target = DMatrix<T>;

    fn deref(&self) -> &DMatrix<T> {
        &self.data
    }
}

impl<T: Real> TryFrom<DMatrix<T>> for Factor<T> {
    type Error = Error;

    fn try_from(m: DMatrix<T>) -> Result<Self> {
        Factor::new(m)
    }
}
