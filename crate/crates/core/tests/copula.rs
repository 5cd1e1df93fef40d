use ib_lab::dvib::copula_transform;
use ib_lab::rng;
use nalgebra::DMatrix;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// Draws with roughly one value in five rounded onto a coarse lattice so that
/// ties occur.
fn data(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut r = rng::stream(seed, 0);
    DMatrix::from_fn(rows, cols, |_, _| {
        let v = rng::normal(&mut r);
        if rng::uniform(&mut r, 0.0, 1.0) < 0.2 {
            (v * 4.0).round() / 4.0
        } else {
            v
        }
    })
}

fn bits(m: &DMatrix<f64>) -> Vec<u64> {
    m.iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(128) })]

    #[test]
    fn invariant_under_increasing_maps(seed in any::<u64>(), rows in 2usize..80, cols in 1usize..4) {
        let x = data(seed, rows, cols);
        prop_assume!((0..cols).all(|j| x.column(j).iter().any(|v| *v != x[(0, j)])));
        let base = bits(&copula_transform(&x).unwrap());
        prop_assert_eq!(&base, &bits(&copula_transform(&x.map(f64::exp)).unwrap()));
        prop_assert_eq!(&base, &bits(&copula_transform(&x.map(|v| v * v * v)).unwrap()));
        let mixed = DMatrix::from_fn(rows, cols, |i, j| if j % 2 == 0 { x[(i, j)].exp() } else { 3.0 * x[(i, j)] - 1.0 });
        prop_assert_eq!(&base, &bits(&copula_transform(&mixed).unwrap()));
    }

    #[test]
    fn output_is_rank_preserving_and_bounded(seed in any::<u64>(), rows in 2usize..80) {
        let x = data(seed, rows, 1);
        prop_assume!(x.iter().any(|v| *v != x[0]));
        let z = copula_transform(&x).unwrap();
        let edge = 1.0 / (rows as f64 + 1.0);
        let bound = -Normal::standard().inverse_cdf(edge);
        prop_assert!(z.iter().all(|v| v.abs() <= bound + 1e-12));
        for i in 0..rows {
            for k in 0..rows {
                if x[i] < x[k] {
                    prop_assert!(z[i] < z[k]);
                } else if x[i] == x[k] {
                    prop_assert_eq!(z[i].to_bits(), z[k].to_bits());
                }
            }
        }
    }
}
