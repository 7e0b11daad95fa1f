//! Ground truths, the three experiment cost models, and initializations.

mod ground_truth;
pub mod io;
mod one_bit;
mod phase;
mod sensing;

pub use ground_truth::GroundTruth;
pub use one_bit::{one_bit_model, sigmoid, softplus, OneBit};
pub use phase::{phase_retrieval_model, PhaseRetrieval};
pub use sensing::{
    default_measurements, matrix_sensing_model, MatrixSensing, SensingOperator, LIPSCHITZ_POWER_STEPS,
};

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::linalg::inner;
use crate::objective::ConvexCost;
use crate::rng::{gaussian_matrix, seeded, stream};
use crate::scalar::Real;
use nalgebra::DMatrix;

/// `X0 = Z_pad + radius * W` with `W` standard Gaussian n x r.
pub fn init_near_truth<T: Real>(gt: &GroundTruth<T>, r: usize, radius: T, seed: u64) -> Result<Factor<T>> {
    if !(radius >= T::zero()) {
        return Err(Error::param("radius", "must be nonnegative"));
    }
    let pad = gt.z_padded(r)?;
    let w: DMatrix<T> = gaussian_matrix(&mut seeded(seed, stream::INIT), gt.n(), r);
    Factor::new(pad.into_inner() + w * radius)
}

/// I.i.d. Gaussian factor scaled by `scale`.
pub fn random_init<T: Real>(n: usize, r: usize, scale: T, seed: u64) -> Result<Factor<T>> {
    if !(scale > T::zero()) {
        return Err(Error::param("scale", "must be positive"));
    }
    let w: DMatrix<T> = gaussian_matrix(&mut seeded(seed, stream::INIT), n, r);
    Factor::new(w * scale)
}

/// Range `[min, max]` of `<E, hess phi(M)[E]>` over random unit-norm symmetric
/// directions `E = G H^T + H G^T` of rank at most `2 * rank`.
///
/// On quadratic costs this is an empirical estimate of the restricted strong
/// convexity and smoothness constants.
pub fn estimate_restricted_curvature<T: Real, C: ConvexCost<T> + ?Sized>(
    model: &C,
    at: &DMatrix<T>,
    rank: usize,
    probes: usize,
    seed: u64,
) -> Result<(T, T)> {
    if !model.has_hessian() {
        return Err(Error::Capability(format!("model `{}` has no Hessian", model.name())));
    }
    let n = model.dim();
    let mut rng = seeded(seed, stream::PROBE);
    let mut lo = T::max_value().unwrap();
    let mut hi = T::zero();
    for _ in 0..probes {
        let g: DMatrix<T> = gaussian_matrix(&mut rng, n, rank);
        let h: DMatrix<T> = gaussian_matrix(&mut rng, n, rank);
        let gh = &g * h.transpose();
        let mut e = &gh + gh.transpose();
        e.unscale_mut(e.norm());
        let he = model.hessian_apply(at, &e).expect("checked has_hessian");
        let q = inner(&e, &he);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Ok((lo, hi))
}
