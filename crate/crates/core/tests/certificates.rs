mod common;

use common::*;
use nalgebra::DMatrix;
use precgd::certify::{spurious_threshold, GroundTruthInfo, PointClass, StationarityThresholds};
use precgd::optimizers::CertifyOptions;
use precgd::problems::{init_near_truth, matrix_sensing_model, one_bit_model, phase_retrieval_model};
use precgd::{
    certificate_euclidean, certificate_local, classify_spurious, eta_adaptive, run_solver, stationarity_check,
    CertificateInputs, Certifier, ConvexCost, EigConfig, Error, GroundTruth, MatrixSensing, Method, SensingOperator,
    SolverOptions, StepConfig, Verdict,
};

fn eig() -> EigConfig<f64> {
    EigConfig {
        tol: 1e-12,
        max_iters: 20_000,
        ..EigConfig::default()
    }
}

fn gap<C: ConvexCost<f64> + ?Sized>(model: &C, x: &precgd::Factor<f64>) -> f64 {
    model.factored_gap(x.as_matrix(), model.factored_value(x.as_matrix())).unwrap()
}

#[test]
fn euclidean_bound_dominates_gap_on_all_models() {
    let gt = GroundTruth::<f64>::generate(7, &[1.0, 0.5], 3).unwrap();
    let sensing = matrix_sensing_model(&gt, 84, 3).unwrap();
    let phase = phase_retrieval_model(&gt, 84, 3).unwrap();
    let one_bit = one_bit_model(&gt);
    let models: [&dyn ConvexCost<f64>; 3] = [&sensing, &phase, &one_bit];
    for model in models {
        let inputs = CertificateInputs::for_model(model, Some(gt.trace()));
        for (seed, radius) in [(0, 1e-1), (1, 1e-2), (2, 1e-3), (3, 0.3)] {
            let x = init_near_truth(&gt, 4, radius, seed).unwrap();
            let rep = certificate_euclidean(model, &x, &inputs, &eig()).unwrap();
            let g = gap(model, &x);
            assert!(rep.bound >= g, "{} r={radius}: {} < {g}", model.name(), rep.bound);
            assert!((rep.assemble() - rep.bound).abs() <= 1e-12 * rep.bound);
        }
    }
}

#[test]
fn local_bound_dominates_gap() {
    let gt = GroundTruth::<f64>::generate(7, &[1.0, 0.5], 4).unwrap();
    let model = matrix_sensing_model(&gt, 84, 4).unwrap();
    let inputs = CertificateInputs::for_model(&model, Some(gt.trace()));
    for seed in 0..4 {
        let x = init_near_truth(&gt, 4, 1e-2, seed).unwrap();
        let eta = eta_adaptive(&model, &x).unwrap();
        let rep = certificate_local(&model, &x, eta, &inputs, &eig()).unwrap();
        assert_eq!(rep.eta, Some(eta));
        assert!(rep.bound >= gap(&model, &x));
    }
}

#[test]
fn certificate_certifies_the_exact_optimum() {
    let gt = GroundTruth::<f64>::generate(6, &[1.0, 0.5], 1).unwrap();
    let model = MatrixSensing::new(SensingOperator::identity(6).unwrap(), &gt.m_star()).unwrap();
    let inputs = CertificateInputs::for_model(&model, Some(gt.trace()));
    let rep = certificate_euclidean(&model, &gt.z_padded(3).unwrap(), &inputs, &eig()).unwrap();
    assert!(rep.bound < 1e-10, "{}", rep.bound);
    assert_eq!(rep.verdict, Verdict::CertifiedNearOptimal);
    assert_eq!(rep.verdict.as_str(), "certified-near-optimal");
}

#[test]
fn estimated_smoothness_is_inflated() {
    let gt = GroundTruth::<f64>::generate(6, &[1.0, 0.5], 1).unwrap();
    let sensing = matrix_sensing_model(&gt, 36, 1).unwrap();
    let one_bit = one_bit_model(&gt);
    let a = CertificateInputs::for_model(&sensing, None);
    assert!(rel(a.l1_bound, 1.05 * sensing.smoothness().lip_grad) < 1e-15);
    let b = CertificateInputs::for_model(&one_bit, None);
    assert_eq!(b.l1_bound, 0.25);
}

#[test]
fn missing_trace_bound_is_a_capability_error() {
    let gt = GroundTruth::<f64>::generate(6, &[1.0, 0.5], 1).unwrap();
    let model = one_bit_model(&gt);
    let inputs = CertificateInputs::for_model(&model, None);
    let x = init_near_truth(&gt, 3, 0.1, 0).unwrap();
    assert!(matches!(
        certificate_euclidean(&model, &x, &inputs, &eig()),
        Err(Error::Capability(_))
    ));
}

#[test]
fn bound_tracks_a_converging_run() {
    let gt = GroundTruth::<f64>::generate(10, &[1.0, 0.5], 2).unwrap();
    let model = one_bit_model(&gt);
    let x0 = init_near_truth(&gt, 4, 1e-2, 2).unwrap();
    let mut step = StepConfig::new(0.5);
    step.max_iters = 60;
    let mut opts = SolverOptions::new(Method::PrecGd, step);
    opts.m_star = Some(gt.m_star());
    let inputs = CertificateInputs::for_model(&model, Some(gt.trace()));
    opts.certify = Some(CertifyOptions {
        every: 5,
        local: false,
        certifier: Certifier::new(inputs, EigConfig { max_iters: 500, ..eig() }).unwrap(),
    });
    let st = run_solver(&model, &x0, opts).unwrap();
    let certified: Vec<_> = st
        .trace
        .iter()
        .filter_map(|r| r.certificate.as_ref().map(|c| (r.f_gap.unwrap(), c.bound)))
        .collect();
    assert!(certified.len() >= 10);
    assert!(st.trace.last().unwrap().certificate.is_some());
    for &(g, b) in &certified {
        assert!(b >= g, "{b} < {g}");
    }
    assert!(certified.last().unwrap().1 < 1e-2 * certified[0].1);
}

#[test]
fn stationarity_predicate() {
    let gt = GroundTruth::<f64>::generate(6, &[1.0, 0.5], 1).unwrap();
    let model = MatrixSensing::new(SensingOperator::identity(6).unwrap(), &gt.m_star()).unwrap();
    let th = StationarityThresholds {
        eps_g: 1e-6,
        eps_h: 1e-6,
        rho: 1e-6,
    };
    assert!(stationarity_check(&model, &gt.z_padded(3).unwrap(), &th, &eig()).unwrap());
    // exact optimum at r = r*: not rank deficient
    assert!(!stationarity_check(&model, &gt.z_padded(2).unwrap(), &th, &eig()).unwrap());
    // saddle: zero gradient, negative curvature
    let mut x = DMatrix::zeros(6, 3);
    x.set_column(0, &gt.z().column(1));
    assert!(!stationarity_check(&model, &factor(x), &th, &eig()).unwrap());
    let bad = StationarityThresholds { eps_g: 0.0, ..th };
    assert!(stationarity_check(&model, &gt.z_padded(3).unwrap(), &bad, &eig()).is_err());
}

#[test]
fn spurious_classification() {
    // phi(M) = ||M - M*||^2: mu = L1 = 2
    let n = 6;
    let mut ms = DMatrix::zeros(n, n);
    ms[(0, 0)] = 1.0;
    ms[(1, 1)] = 0.25;
    let model = MatrixSensing::new(SensingOperator::identity(n).unwrap(), &ms).unwrap();
    let info = GroundTruthInfo {
        mu: 2.0,
        l1: 2.0,
        lambda_rstar: 0.25,
        trace_mstar: 1.25,
        r_star: 2,
    };
    let want = 2.0 / (4.0 * 4.0) * 0.0625 / 1.25;
    assert!(rel(spurious_threshold(2.0, 2.0, 0.25, 1.25), want) < 1e-15);

    let mut global = DMatrix::zeros(n, 3);
    global[(0, 0)] = 1.0;
    global[(1, 1)] = 0.5;
    let c = classify_spurious(&model, &factor(global), &info).unwrap();
    assert_eq!(c.class, PointClass::Global);

    let mut stuck = DMatrix::zeros(n, 3);
    stuck[(0, 0)] = 1.0;
    stuck[(1, 1)] = 0.5;
    stuck[(2, 2)] = 0.3;
    let c = classify_spurious(&model, &factor(stuck), &info).unwrap();
    assert_eq!(c.class, PointClass::Spurious);
    assert!(rel(c.eps_lambda, 0.09) < 1e-12);

    let exact = precgd::Factor::zeros(n, 2).unwrap();
    assert!(matches!(classify_spurious(&model, &exact, &info), Err(Error::Capability(_))));
}

#[test]
fn verdict_flags_rank_heavy_stationary_points() {
    let n = 6;
    let mut ms = DMatrix::zeros(n, n);
    ms[(0, 0)] = 1.0;
    ms[(1, 1)] = 0.25;
    ms[(2, 2)] = 0.25;
    // search rank 3 on a rank-3 target, certified against a claimed rank-2 structure
    let model = MatrixSensing::new(SensingOperator::identity(n).unwrap(), &ms).unwrap();
    let mut inputs = CertificateInputs::for_model(&model, Some(1.5));
    inputs.mu = Some(2.0);
    inputs.lambda_rstar = Some(0.25);
    let mut x = DMatrix::zeros(n, 3);
    x[(0, 0)] = 1.0;
    x[(1, 1)] = 0.5;
    x[(2, 2)] = 0.5;
    let rep = certificate_euclidean(&model, &factor(x), &inputs, &eig()).unwrap();
    assert_eq!(rep.verdict, Verdict::LikelySpurious);
}
