//! Seeded random streams.
//!
//! Every random draw goes through ChaCha8 seeded from a 64-bit seed, with a
//! stream tag separating independent uses of the same seed. Gaussian samples
//! use the ziggurat sampler from `rand_distr` and are drawn in `f64` before
//! conversion, so `f32` and `f64` runs see the same underlying sequence.

use crate::scalar::Real;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Name of the generator and Gaussian sampler, recorded in run summaries.
pub const RNG_DESCRIPTION: &str = "ChaCha8 (rand_chacha 0.9) + ziggurat StandardNormal (rand_distr 0.5)";

/// Stream tags for the independent random inputs of an experiment.
pub mod stream {
    pub const GROUND_TRUTH: u64 = 1;
    pub const SENSING: u64 = 2;
    pub const PHASE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const PERTURB: u64 = 5;
    pub const POWER_ITERATION: u64 = 6;
    pub const PROBE: u64 = 7;
    pub const EIGEN: u64 = 8;
}

pub type SeededRng = ChaCha8Rng;

/// Generator for `(seed, tag)`.
pub fn seeded(seed: u64, tag: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

pub fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z)
}

/// Matrix with i.i.d. standard normal entries, filled column-major.
pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Uniform sample from the Frobenius ball of radius `radius` in R^{rows x cols}.
pub fn uniform_ball<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, radius: T) -> DMatrix<T> {
    let dir: DMatrix<f64> = gaussian_matrix(rng, rows, cols);
    let nrm = dir.norm();
    let u: f64 = rng.random::<f64>();
    let rho = u.powf(1.0 / (rows * cols) as f64);
    let scale = rho / nrm;
    dir.map(|v| T::lit(v * scale) * radius)
}
