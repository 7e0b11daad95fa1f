//! Preconditioned gradient descent for overparameterized Burer-Monteiro
//! factorization `min_X phi(X X^T)`, with a-posteriori global optimality
//! certificates based on rank deficiency.

pub mod certify;
pub mod error;
pub mod factor;
pub mod linalg;
pub mod objective;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use factor::Factor;
pub use objective::{
    cost, dual_local_norm, grad, hess_vec, hess_vec_fd, local_norm, ConvexCost, FdScheme, LocalNormContext,
    Smoothness,
};
pub use scalar::Real;
pub use certify::{
    certificate_euclidean, certificate_local, classify_spurious, min_hess_eig, rank_deficiency, stationarity_check,
    CertificateInputs, CertificateReport, Certifier, EigConfig, EigEstimate, HessianSource, Verdict,
};
pub use optimizers::{
    eta_adaptive, gd_step, pprecgd_step, precgd_step, run_solver, scaled_gd_step, EtaMode, EtaRule, Method,
    PerturbConfig, SolverOptions, SolverState, StepConfig,
};
pub use problems::{GroundTruth, MatrixSensing, OneBit, PhaseRetrieval, SensingOperator};

/// Double-precision aliases for the common case.
pub type FactorMatrix = Factor<f64>;
pub type GroundTruth64 = GroundTruth<f64>;
pub type MatrixSensing64 = MatrixSensing<f64>;
pub type OneBit64 = OneBit<f64>;
pub type PhaseRetrieval64 = PhaseRetrieval<f64>;
pub type SolverState64 = SolverState<f64>;
pub type CertificateReport64 = CertificateReport<f64>;
