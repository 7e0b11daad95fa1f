use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::linalg::SymEig;
use crate::rng::{gaussian_matrix, seeded, stream};
use crate::scalar::Real;
use nalgebra::DMatrix;

/// Planted PSD matrix `M* = Z Z^T` with `Z` of size n x r*.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T: Real> {
    z: DMatrix<T>,
    spectrum: Vec<T>,
    seed: u64,
}

impl<T: Real> GroundTruth<T> {
    /// `M* = Q^T diag(spectrum, 0, ..., 0) Q` with `Q` Haar-distributed.
    ///
    /// `Q` comes from the QR factorization of an n x n Gaussian matrix with the
    /// signs of `diag(R)` folded into `Q`.
    pub fn generate(n: usize, spectrum: &[T], seed: u64) -> Result<Self> {
        let r_star = spectrum.len();
        if r_star == 0 || r_star > n {
            return Err(Error::param(
                "spectrum",
                format!("need 1 <= len(spectrum) <= n, got {r_star} with n={n}"),
            ));
        }
        if spectrum.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::param("spectrum", "entries must be positive and finite"));
        }
        if spectrum.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::param("spectrum", "must be sorted in descending order"));
        }
        let mut rng = seeded(seed, stream::GROUND_TRUTH);
        let g: DMatrix<f64> = gaussian_matrix(&mut rng, n, n);
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        // M* = Q^T Lambda Q = sum_i lambda_i q_i q_i^T with q_i the i-th row of Q
        let z = DMatrix::from_fn(n, r_star, |row, col| {
            T::lit(q[(col, row)]) * spectrum[col].sqrt()
        });
        Ok(Self {
            z,
            spectrum: spectrum.to_vec(),
            seed,
        })
    }

    /// Spectrum `(1, 1/kappa, ..., 1/kappa)` with the largest value 1.
    pub fn generate_with_kappa(n: usize, r_star: usize, kappa: T, seed: u64) -> Result<Self> {
        if !(kappa >= T::one()) {
            return Err(Error::param("kappa", "must be >= 1"));
        }
        let spectrum: Vec<T> = (0..r_star)
            .map(|i| if i == 0 { T::one() } else { T::one() / kappa })
            .collect();
        Self::generate(n, &spectrum, seed)
    }

    /// Wraps an explicit full-column-rank factor; the spectrum is read off `Z^T Z`.
    pub fn from_factor(z: DMatrix<T>, seed: u64) -> Result<Self> {
        let eig = SymEig::new(&z.tr_mul(&z));
        let mut spectrum = eig.values.clone();
        spectrum.reverse();
        if spectrum.iter().any(|&l| !(l > T::zero())) {
            return Err(Error::param("z", "factor must have full column rank"));
        }
        Ok(Self { z, spectrum, seed })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn r_star(&self) -> usize {
        self.z.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn z(&self) -> &DMatrix<T> {
        &self.z
    }

    /// Nonzero eigenvalues of `M*`, descending.
    pub fn spectrum(&self) -> &[T] {
        &self.spectrum
    }

    pub fn lambda_max(&self) -> T {
        self.spectrum[0]
    }

    /// Smallest nonzero eigenvalue `lambda_{r*}(M*)`.
    pub fn lambda_r_star(&self) -> T {
        *self.spectrum.last().unwrap()
    }

    pub fn kappa(&self) -> T {
        self.lambda_max() / self.lambda_r_star()
    }

    /// `tr(M*) = ||Z||_F^2`.
    pub fn trace(&self) -> T {
        self.spectrum.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn m_star(&self) -> DMatrix<T> {
        &self.z * self.z.transpose()
    }

    /// `Z` padded with `r - r*` zero columns so that `Z_pad Z_pad^T = M*`.
    pub fn z_padded(&self, r: usize) -> Result<Factor<T>> {
        if r < self.r_star() {
            return Err(Error::param(
                "r",
                format!("search rank {r} below true rank {}", self.r_star()),
            ));
        }
        let mut pad = DMatrix::zeros(self.n(), r);
        pad.columns_mut(0, self.r_star()).copy_from(&self.z);
        Factor::new(pad)
    }
}
