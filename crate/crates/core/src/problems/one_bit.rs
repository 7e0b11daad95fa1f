//! 1-bit matrix sensing in the infinite-sample limit.
//!
//! `phi(M) = sum_ij [log(1 + exp(M_ij)) - alpha_ij M_ij]` with `alpha = sigmoid(M*)`,
//! summed (not averaged) over all n^2 entries.

use super::ground_truth::GroundTruth;
use crate::objective::{ConvexCost, Smoothness};
use crate::scalar::{lit, Real};
use nalgebra::DMatrix;

/// `log(1 + e^x)` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `softplus(b + d) - softplus(b) - sigmoid(b) d`, accurate for small `d`.
fn softplus_bregman<T: Real>(b: T, d: T) -> T {
    let s = sigmoid(b);
    if d.abs() <= T::one() {
        // softplus(b + d) - softplus(b) = log(1 + s (e^d - 1))
        (s * d.exp_m1()).ln_1p() - s * d
    } else {
        softplus(b + d) - softplus(b) - s * d
    }
}

#[derive(Debug, Clone)]
pub struct OneBit<T: Real> {
    m_star: DMatrix<T>,
    alpha: DMatrix<T>,
    optimal: T,
}

impl<T: Real> OneBit<T> {
    pub fn new(m_star: DMatrix<T>) -> Self {
        let alpha = m_star.map(sigmoid);
        let optimal = m_star
            .iter()
            .zip(alpha.iter())
            .fold(T::zero(), |acc, (&m, &a)| acc + softplus(m) - a * m);
        Self {
            m_star,
            alpha,
            optimal,
        }
    }

    /// Empirical frequencies `alpha_ij`.
    pub fn alpha(&self) -> &DMatrix<T> {
        &self.alpha
    }
}

pub fn one_bit_model<T: Real>(gt: &GroundTruth<T>) -> OneBit<T> {
    OneBit::new(gt.m_star())
}

impl<T: Real> ConvexCost<T> for OneBit<T> {
    fn dim(&self) -> usize {
        self.alpha.nrows()
    }

    fn smoothness(&self) -> Smoothness<T> {
        Smoothness {
            // max of sigmoid'
            lip_grad: lit(0.25),
            lip_grad_estimated: false,
            lip_hess: Some(lit(1.0 / (6.0 * 3f64.sqrt()))),
            rsc_mu: None,
        }
    }

    fn value(&self, m: &DMatrix<T>) -> T {
        m.iter()
            .zip(self.alpha.iter())
            .fold(T::zero(), |acc, (&x, &a)| acc + softplus(x) - a * x)
    }

    fn gradient(&self, m: &DMatrix<T>) -> DMatrix<T> {
        m.zip_map(&self.alpha, |x, a| sigmoid(x) - a)
    }

    fn hessian_apply(&self, m: &DMatrix<T>, e: &DMatrix<T>) -> Option<DMatrix<T>> {
        Some(m.zip_map(e, |x, v| {
            let s = sigmoid(x);
            s * (T::one() - s) * v
        }))
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn optimal_value(&self) -> Option<T> {
        Some(self.optimal)
    }

    fn factored_gap(&self, x: &DMatrix<T>, _value: T) -> Option<T> {
        let m = x * x.transpose();
        Some(
            m.iter()
                .zip(self.m_star.iter())
                .fold(T::zero(), |acc, (&mv, &ms)| acc + softplus_bregman(ms, mv - ms)),
        )
    }

    fn name(&self) -> &str {
        "one_bit"
    }
}
