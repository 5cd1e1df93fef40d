mod common;

use common::{random_simplex, random_stochastic};
use ib_lab::decomposition::{
    conditional_identity_gaps, decompose_discrete, decompose_gaussian, decompose_gaussian_with_decoder,
    discretize_gaussian, violation_profile, TriplePmf,
};
use ib_lab::graph::parse_edge;
use ib_lab::mc::{mc_bound_term, DEFAULT_SAMPLES};
use ib_lab::rng;
use ib_lab::sem::random_sem;
use ib_lab::{Dag, GaussianJoint, Scenario};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dag(edges: &[&str]) -> Dag {
    Dag::new(edges.iter().map(|e| parse_edge(e).unwrap())).unwrap()
}

fn random_joint_on(edges: &[&str], seed: u64, dims: [usize; 3]) -> GaussianJoint {
    random_sem(&dag(edges), dims, &mut rng::stream(seed, 2)).build_joint().unwrap()
}

fn random_triple(seed: u64, chain: bool) -> TriplePmf {
    let mut r = rng::stream(seed, 9);
    let nx = 2 + (seed % 3) as usize;
    let ny = 2 + (seed / 3 % 3) as usize;
    let nt = 2 + (seed / 9 % 3) as usize;
    let p_x = random_simplex(&mut r, nx);
    let t_given_x = random_stochastic(&mut r, nx, nt);
    if chain {
        TriplePmf::chain_xty(&p_x, &t_given_x, &random_stochastic(&mut r, nt, ny)).unwrap()
    } else {
        TriplePmf::fork(&p_x, &random_stochastic(&mut r, nx, ny), &t_given_x).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(100) })]

    #[test]
    fn chain_xty_residual_vanishes(seed in any::<u64>(), dx in 1usize..3, dy in 1usize..3, dt in 1usize..3) {
        let r = decompose_gaussian(&random_joint_on(&["X->T", "T->Y"], seed, [dx, dy, dt])).unwrap();
        prop_assert!(r.residual.abs() < 1e-8, "{r:?}");
        prop_assert!(r.txy_violation > 0.0);
    }

    #[test]
    fn fork_violation_vanishes(seed in any::<u64>(), dx in 1usize..3, dy in 1usize..3, dt in 1usize..3) {
        let r = decompose_gaussian(&random_joint_on(&["X->T", "X->Y"], seed, [dx, dy, dt])).unwrap();
        prop_assert!(r.txy_violation < 1e-10, "{r:?}");
        prop_assert!(r.residual >= -1e-9);
    }

    #[test]
    fn identity_terms_are_consistent(seed in any::<u64>(), pick in 0usize..4) {
        let edges: &[&str] = [
            &["X->T", "X->Y", "T->Y"][..],
            &["X->T", "Y->X"][..],
            &["T->X", "X->Y", "T->Y"][..],
            &["X->T", "T->Y", "X->Y"][..],
        ][pick];
        let r = decompose_gaussian(&random_joint_on(edges, seed, [1, 1, 1])).unwrap();
        prop_assert!(r.cmi >= -1e-12 && r.clautum >= -1e-12);
        prop_assert!((r.residual - (r.i_ty_exact - r.bound_term - r.cmi - r.clautum)).abs() < 1e-12);
        prop_assert!((r.xty_violation - r.residual.abs()).abs() < 1e-15);
        prop_assert!(r.bound_term <= r.h_y + 1e-12);
    }

    #[test]
    fn decoder_gap_is_nonnegative_on_forks(seed in any::<u64>(), scale in 0.1f64..3.0) {
        let joint = random_joint_on(&["X->T", "X->Y"], seed, [2, 1, 2]);
        let mut decoder = joint.conditional(&["Y"], &["T"]).unwrap();
        decoder.regression *= scale;
        let (_, gap) = decompose_gaussian_with_decoder(&joint, &decoder).unwrap();
        prop_assert!(gap >= -1e-12, "{gap}");
    }

    #[test]
    fn discrete_chain_residual_vanishes(seed in 0u64..1_000_000) {
        let pmf = random_triple(seed, true);
        let r = decompose_discrete(&pmf, None).unwrap();
        prop_assert!(r.residual.abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn discrete_fork_violation_vanishes(seed in 0u64..1_000_000) {
        let r = decompose_discrete(&random_triple(seed, false), None).unwrap();
        prop_assert!(r.txy_violation < 1e-12, "{r:?}");
    }

    #[test]
    fn conditional_identity_holds_for_any_pmf(seed in 0u64..1_000_000) {
        let mut r = rng::stream(seed, 10);
        let p = random_simplex(&mut r, 2 * 3 * 2);
        let pmf = TriplePmf::new([2, 3, 2], p).unwrap();
        for gap in conditional_identity_gaps(&pmf).unwrap() {
            prop_assert!(gap.abs() < 1e-12);
        }
    }
}

#[test]
fn violations_separate_the_two_chains() {
    let report = |s: Scenario| decompose_gaussian(&s.sem().build_joint().unwrap()).unwrap();
    let xty = report(Scenario::ChainXty);
    assert!(xty.xty_violation < 1e-12 && xty.txy_violation > 0.1);
    // Under T ⟂ Y | X the joint equals the product coupling, so both terms vanish.
    let txy = report(Scenario::ChainTxy);
    assert!(txy.txy_violation < 1e-12 && txy.xty_violation < 1e-12);
    let generic = decompose_gaussian(&random_joint_on(&["X->T", "X->Y", "T->Y"], 3, [1, 1, 1])).unwrap();
    assert!(generic.txy_violation > 1e-3 && generic.xty_violation > 1e-3, "{generic:?}");
}

#[test]
fn discretisation_approaches_gaussian_terms() {
    let joint = Scenario::ChainXty.sem().build_joint().unwrap();
    let exact = decompose_gaussian(&joint).unwrap();
    let grid = discretize_gaussian(&joint, 41, 4.0).unwrap();
    let approx = decompose_discrete(&grid, Some(1e-12)).unwrap();
    for (a, b) in [
        (approx.cmi, exact.cmi),
        (approx.clautum, exact.clautum),
        (approx.i_ty_exact, exact.i_ty_exact),
        (approx.residual, exact.residual),
    ] {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}

#[test]
fn profile_grows_with_the_direct_edge() {
    let sem = Scenario::Confounded.sem();
    let grid: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
    let rows = violation_profile(&sem, parse_edge("T->Y").unwrap(), &grid).unwrap();
    assert!(rows[0].txy_violation < 1e-12 && rows[0].xty_violation < 1e-12);
    for w in rows.windows(2) {
        assert!(w[1].txy_violation > w[0].txy_violation);
    }
    let rows = violation_profile(&sem, parse_edge("X->Y").unwrap(), &grid).unwrap();
    assert!(rows[0].xty_violation < 1e-12 && rows[0].txy_violation > 0.1);
    assert!(rows.iter().any(|r| r.xty_violation > 0.01));
}

/// Frozen from the reference run: the T-X-Y violation of the Y->T control
/// grows strictly from zero as the forbidden edge strengthens.
#[test]
fn forbidden_edge_profile() {
    let grid: Vec<f64> = (0..7).map(|i| i as f64 * 0.25).collect();
    let rows = violation_profile(&Scenario::YIntoT.sem(), parse_edge("Y->T").unwrap(), &grid).unwrap();
    assert!(rows[0].txy_violation < 1e-12 && rows[0].i_ty_exact < 1e-12);
    for w in rows.windows(2) {
        assert!(w[1].txy_violation > w[0].txy_violation);
    }
    assert!((rows[4].txy_violation - 1.0).abs() < 1e-9);
    assert!((rows[4].i_ty_exact - 0.2027325541).abs() < 1e-9);
}

#[test]
fn bound_term_matches_monte_carlo() {
    let independent = GaussianJoint::new(vec![("X", 1), ("Y", 1), ("T", 1)], DMatrix::identity(3, 3)).unwrap();
    let fork = Scenario::ChainTxy.sem().build_joint().unwrap();
    let chain = Scenario::ChainXty.sem().build_joint().unwrap();
    for (seed, joint) in [independent, fork, chain].iter().enumerate() {
        let closed = decompose_gaussian(joint).unwrap().bound_term;
        let est = mc_bound_term(joint, DEFAULT_SAMPLES, 100 + seed as u64).unwrap();
        assert!(est.agrees_with(closed, 3.0), "{closed} vs {est:?}");
    }
}
