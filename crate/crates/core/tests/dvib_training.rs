use ib_lab::dvib::{dvib_objective_and_grad, dvib_train, DvibOptions, LinearDvibParams};
use ib_lab::gib::gib_analytic;
use ib_lab::optim::gradient_check;
use ib_lab::rng;
use ib_lab::GaussianJoint;
use nalgebra::{DMatrix, DVector};

fn bivariate(rho: f64) -> GaussianJoint {
    GaussianJoint::new(vec![("X", 1), ("Y", 1)], DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))
        .unwrap()
}

fn planar() -> GaussianJoint {
    GaussianJoint::new(
        vec![("X", 2), ("Y", 1)],
        DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.6, 0.3, 1.5, -0.5, 0.6, -0.5, 1.0]),
    )
    .unwrap()
}

#[test]
fn scalar_joint_reaches_gib_point() {
    let j = bivariate(0.5);
    for beta in [5.0, 6.0, 8.0, 10.0, 20.0] {
        let r = dvib_train(&j, beta, 1, 1, DvibOptions::default()).unwrap();
        let g = gib_analytic(&j, beta).unwrap();
        assert!(r.converged, "beta {beta}");
        assert!(r.fd_error_init < 1e-5 && r.fd_error_final < 1e-5);
        assert!((r.objective.i_xt_term - g.i_xt).abs() < 1e-3, "beta {beta}: {} vs {}", r.objective.i_xt_term, g.i_xt);
        assert!((r.objective.i_ty_bound_term - g.i_ty).abs() < 1e-3, "beta {beta}");
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }
    let r = dvib_train(&j, 8.0, 1, 1, DvibOptions::default()).unwrap();
    assert!((r.objective.i_xt_term - 0.4236).abs() < 1e-3);
    assert!((r.objective.i_ty_bound_term - 0.0770).abs() < 1e-3);
}

#[test]
fn below_critical_beta_collapses() {
    let r = dvib_train(&bivariate(0.5), 0.5, 1, 2, DvibOptions::default()).unwrap();
    assert!(r.objective.i_xt_term < 1e-4, "{}", r.objective.i_xt_term);
}

#[test]
fn seeds_agree_on_objective() {
    let j = planar();
    let a = dvib_train(&j, 8.0, 2, 11, DvibOptions::default()).unwrap();
    let b = dvib_train(&j, 8.0, 2, 12, DvibOptions::default()).unwrap();
    assert!((a.objective.value - b.objective.value).abs() < 1e-5);
}

#[test]
fn planar_joint_tracks_gib_curve() {
    let j = planar();
    for beta in [2.0, 4.0, 8.0, 15.0, 30.0] {
        let r = dvib_train(&j, beta, 2, 5, DvibOptions::default()).unwrap();
        let g = gib_analytic(&j, beta).unwrap();
        assert!((r.objective.i_xt_term - g.i_xt).abs() < 1e-3, "beta {beta}: {} vs {}", r.objective.i_xt_term, g.i_xt);
        assert!((r.objective.i_ty_bound_term - g.i_ty).abs() < 1e-3, "beta {beta}");
    }
}

#[test]
fn gradients_match_differences_at_random_points() {
    for (k, j) in [bivariate(0.5), planar()].iter().enumerate() {
        let dx = j.block_dim("X").unwrap();
        for point in 0..10 {
            let mut r = rng::stream(77 + k as u64, point);
            let p = LinearDvibParams {
                enc_weight: rng::normal_matrix(&mut r, 2, dx),
                enc_logvar: rng::normal_vector(&mut r, 2) * 0.5,
                dec_weight: rng::normal_matrix(&mut r, 1, 2),
                dec_logvar: rng::normal_vector(&mut r, 1) * 0.5,
            };
            let flat = |q: &LinearDvibParams| {
                DVector::from_iterator(
                    2 * dx + 2 + 2 + 1,
                    q.enc_weight.iter().chain(q.enc_logvar.iter()).chain(q.dec_weight.iter()).chain(q.dec_logvar.iter()).copied(),
                )
            };
            let unflat = |v: &DVector<f64>| LinearDvibParams {
                enc_weight: DMatrix::from_column_slice(2, dx, &v.as_slice()[..2 * dx]),
                enc_logvar: DVector::from_column_slice(&v.as_slice()[2 * dx..2 * dx + 2]),
                dec_weight: DMatrix::from_column_slice(1, 2, &v.as_slice()[2 * dx + 2..2 * dx + 4]),
                dec_logvar: DVector::from_column_slice(&v.as_slice()[2 * dx + 4..]),
            };
            let f = |v: &DVector<f64>| {
                let (val, g) = dvib_objective_and_grad(&unflat(v), j, 6.0).unwrap();
                (val, flat(&g))
            };
            assert!(gradient_check(f, &flat(&p), 1e-5) < 1e-5);
        }
    }
}
