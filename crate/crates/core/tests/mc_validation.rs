mod common;

use common::{bivariate, mc_checks};
use ib_lab::discrete::DiscreteJoint;
use ib_lab::mc::{mc_entropy, mc_kl, McDistribution, DEFAULT_SAMPLES};
use ib_lab::IbError;
use nalgebra::DMatrix;

#[test]
fn closed_forms_agree_with_monte_carlo() {
    let checks = mc_checks(DEFAULT_SAMPLES);
    assert!(checks.len() >= 30);
    for c in checks {
        assert!(
            c.estimate.agrees_with(c.closed_form, 3.0),
            "{}: closed form {} vs {} ± {}",
            c.label,
            c.closed_form,
            c.estimate.value,
            c.estimate.std_error
        );
    }
}

#[test]
fn bivariate_divergences_match_frozen_values() {
    let j = bivariate(0.5);
    let product = j.independent_product(&["X"], &["Y"]).unwrap();
    let mi = mc_kl(McDistribution::Gaussian(&j), McDistribution::Gaussian(&product), DEFAULT_SAMPLES, 9).unwrap();
    assert!(mi.agrees_with(0.143_841_036_225_890_45, 3.0), "{mi:?}");
    let la = mc_kl(McDistribution::Gaussian(&product), McDistribution::Gaussian(&j), DEFAULT_SAMPLES, 9).unwrap();
    assert!(la.agrees_with(0.189_492_297_107_442_8, 3.0), "{la:?}");
}

#[test]
fn discrete_kl_matches_direct_sum() {
    let p = DiscreteJoint::new(DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.4])).unwrap();
    let q = DiscreteJoint::new(DMatrix::from_element(2, 2, 0.25)).unwrap();
    let exact = 0.8 * (1.6f64).ln() + 0.2 * (0.4f64).ln();
    let est = mc_kl(McDistribution::Discrete(&p), McDistribution::Discrete(&q), DEFAULT_SAMPLES, 2).unwrap();
    assert!(est.agrees_with(exact, 3.0), "{est:?} vs {exact}");
}

#[test]
fn standard_error_shrinks_with_root_n() {
    let j = bivariate(0.5);
    let small = mc_entropy(&j, &["X", "Y"], 50_000, 4).unwrap();
    let large = mc_entropy(&j, &["X", "Y"], 100_000, 4).unwrap();
    let ratio = large.std_error / small.std_error;
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn estimates_are_seed_deterministic() {
    let j = bivariate(0.3);
    let a = mc_entropy(&j, &["X"], 1000, 17).unwrap();
    let b = mc_entropy(&j, &["X"], 1000, 17).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.value, mc_entropy(&j, &["X"], 1000, 18).unwrap().value);
}

#[test]
fn mismatched_or_singular_pairs_are_rejected() {
    let g = bivariate(0.5);
    let d = DiscreteJoint::new(DMatrix::from_element(2, 2, 0.25)).unwrap();
    assert!(matches!(
        mc_kl(McDistribution::Gaussian(&g), McDistribution::Discrete(&d), 10, 0),
        Err(IbError::UnsupportedPair)
    ));
    let sparse = DiscreteJoint::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])).unwrap();
    assert!(mc_kl(McDistribution::Discrete(&d), McDistribution::Discrete(&sparse), 10, 0).is_err());
}
