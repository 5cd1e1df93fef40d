//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use ib_lab::discrete::DiscreteJoint;
use ib_lab::rng::{self, Rng};
use ib_lab::GaussianJoint;
use nalgebra::DMatrix;

/// Random positive definite matrix `M Mᵀ / n + floor · I`.
pub fn random_pd(rng: &mut Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let m = rng::normal_matrix(rng, n, n);
    let s = &m * m.transpose() / n as f64 + DMatrix::identity(n, n) * floor;
    (&s + s.transpose()) * 0.5
}

/// Random joint over blocks `X` and `Y`.
pub fn random_xy_joint(seed: u64, dx: usize, dy: usize) -> GaussianJoint {
    let mut r = rng::stream(seed, 7);
    GaussianJoint::new(vec![("X", dx), ("Y", dy)], random_pd(&mut r, dx + dy, 0.2)).unwrap()
}

pub fn bivariate(rho: f64) -> GaussianJoint {
    GaussianJoint::new(vec![("X", 1), ("Y", 1)], DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))
        .unwrap()
}

pub fn planar() -> GaussianJoint {
    GaussianJoint::new(
        vec![("X", 2), ("Y", 1)],
        DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.6, 0.3, 1.5, -0.5, 0.6, -0.5, 1.0]),
    )
    .unwrap()
}

/// Row-stochastic `rows × cols` matrix with entries bounded away from zero.
pub fn random_stochastic(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| rng::uniform(rng, 0.05, 1.0));
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

pub fn random_simplex(rng: &mut Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng::uniform(rng, 0.05, 1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Random two-way pmf with strictly positive entries.
pub fn random_pair_pmf(seed: u64, rows: usize, cols: usize) -> DiscreteJoint {
    let mut r = rng::stream(seed, 11);
    let p: Vec<f64> = random_simplex(&mut r, rows * cols);
    DiscreteJoint::new(DMatrix::from_row_slice(rows, cols, &p)).unwrap()
}

/// Discrete bottleneck functional `I(X;T) - β I(T;Y)` computed directly from
/// the encoder rows, independent of the library.
pub fn ib_value(p_xy: &DMatrix<f64>, enc: &[Vec<f64>], beta: f64) -> f64 {
    let (nx, ny) = p_xy.shape();
    let nt = enc[0].len();
    let px: Vec<f64> = (0..nx).map(|x| p_xy.row(x).sum()).collect();
    let py: Vec<f64> = (0..ny).map(|y| p_xy.column(y).sum()).collect();
    let mut pt = vec![0.0; nt];
    let mut pty = vec![0.0; nt * ny];
    for x in 0..nx {
        for t in 0..nt {
            let w = enc[x][t];
            pt[t] += px[x] * w;
            for y in 0..ny {
                pty[t * ny + y] += w * p_xy[(x, y)];
            }
        }
    }
    let mut i_xt = 0.0;
    for x in 0..nx {
        for t in 0..nt {
            let q = enc[x][t];
            if q > 0.0 && px[x] > 0.0 {
                i_xt += px[x] * q * (q / pt[t]).ln();
            }
        }
    }
    let mut i_ty = 0.0;
    for t in 0..nt {
        for y in 0..ny {
            let p = pty[t * ny + y];
            if p > 0.0 {
                i_ty += p * (p / (pt[t] * py[y])).ln();
            }
        }
    }
    i_xt - beta * i_ty
}

/// Every grid point of the `k`-simplex with spacing `1/steps`.
fn simplex_grid(k: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, steps: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&c| c as f64 / steps as f64).collect());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(k - 1, left - c, steps, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, steps, steps, &mut Vec::new(), &mut out);
    out
}

/// Coordinate pattern search: moves mass between pairs of cells of one
/// encoder row, halving the step when no move improves.
fn pattern_search(p_xy: &DMatrix<f64>, mut enc: Vec<Vec<f64>>, beta: f64, step: f64) -> f64 {
    let nt = enc[0].len();
    let mut best = ib_value(p_xy, &enc, beta);
    let mut delta = step;
    while delta > 1e-10 {
        let mut improved = false;
        for x in 0..enc.len() {
            for i in 0..nt {
                for j in 0..nt {
                    if i == j || enc[x][i] <= 0.0 {
                        continue;
                    }
                    let m = delta.min(enc[x][i]);
                    enc[x][i] -= m;
                    enc[x][j] += m;
                    let v = ib_value(p_xy, &enc, beta);
                    if v < best - 1e-15 {
                        best = v;
                        improved = true;
                    } else {
                        enc[x][i] += m;
                        enc[x][j] -= m;
                    }
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    best
}

/// Global minimum of the discrete bottleneck functional over encoders with
/// `t_card` cells: exhaustive simplex grid per row, then pattern-search
/// refinement of the best grid points.
pub fn ib_grid_oracle(p_xy: &DMatrix<f64>, t_card: usize, beta: f64) -> f64 {
    let nx = p_xy.nrows();
    let steps = match (nx, t_card) {
        (2, 2) => 1000,
        _ => 10,
    };
    let rows = simplex_grid(t_card, steps);
    const KEEP: usize = 8;
    let mut scored: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut idx = vec![0usize; nx];
    loop {
        let enc: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let v = ib_value(p_xy, &enc, beta);
        if scored.len() < KEEP || v < scored[KEEP - 1].0 {
            let at = scored.partition_point(|s| s.0 <= v);
            scored.insert(at, (v, idx.clone()));
            scored.truncate(KEEP);
        }
        let mut k = 0;
        loop {
            if k == nx {
                break;
            }
            idx[k] += 1;
            if idx[k] < rows.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == nx {
            break;
        }
    }
    let refine_step = 1.0 / steps as f64;
    scored
        .iter()
        .map(|(v, idx)| {
            let enc: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
            pattern_search(p_xy, enc, beta, refine_step).min(*v)
        })
        .fold(f64::INFINITY, f64::min)
}

/// 2×2 and 3×3 pmfs used to check the Blahut-Arimoto solver.
pub fn ba_fixtures() -> Vec<DMatrix<f64>> {
    let mut out = vec![
        DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.4]),
        DMatrix::from_row_slice(2, 2, &[0.3, 0.2, 0.05, 0.45]),
        DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.15, 0.15]),
    ];
    for seed in 0..3 {
        out.push(random_pair_pmf(seed, 3, 3).pmf().clone());
    }
    out
}

/// One closed-form quantity next to its seeded Monte-Carlo estimate.
pub struct McCheck {
    pub label: String,
    pub closed_form: f64,
    pub estimate: ib_lab::mc::McEstimate,
}

/// The named fixtures: two bivariate joints and the four unit scenarios.
pub fn named_fixtures() -> Vec<(&'static str, GaussianJoint)> {
    use ib_lab::Scenario;
    let mut out = vec![("rho05", bivariate(0.5)), ("planar", planar())];
    for s in Scenario::ALL {
        out.push((s.name(), s.sem().build_joint().unwrap()));
    }
    out
}

/// Every closed-form Gaussian quantity on every named fixture, each paired
/// with a Monte-Carlo estimate from its own seed.
pub fn mc_checks(n: usize) -> Vec<McCheck> {
    use ib_lab::decomposition::{decompose_gaussian, product_coupling};
    use ib_lab::gaussian::expected_log_density;
    use ib_lab::mc::{self, McDistribution};

    let mut out = Vec::new();
    let mut seed = 0u64;
    let mut push = |label: String, closed_form: f64, est: &dyn Fn(u64) -> ib_lab::mc::McEstimate| {
        seed += 1;
        out.push(McCheck { label, closed_form, estimate: est(seed) });
    };
    for (name, j) in named_fixtures() {
        if !j.has_block("T") {
            let product = j.independent_product(&["X"], &["Y"]).unwrap();
            push(format!("{name} H(X)"), j.entropy(&["X"]).unwrap(), &|s| mc::mc_entropy(&j, &["X"], n, s).unwrap());
            push(format!("{name} H(X,Y)"), j.entropy(&["X", "Y"]).unwrap(), &|s| {
                mc::mc_entropy(&j, &["X", "Y"], n, s).unwrap()
            });
            push(format!("{name} I(X;Y)"), j.mutual_information(&["X"], &["Y"]).unwrap(), &|s| {
                mc::mc_conditional_mutual_information(&j, &["X"], &["Y"], &[], n, s).unwrap()
            });
            push(format!("{name} KL(joint||product)"), j.mutual_information(&["X"], &["Y"]).unwrap(), &|s| {
                mc::mc_kl(McDistribution::Gaussian(&j), McDistribution::Gaussian(&product), n, s).unwrap()
            });
            push(format!("{name} L(X;Y)"), j.lautum_information(&["X"], &["Y"]).unwrap(), &|s| {
                mc::mc_kl(McDistribution::Gaussian(&product), McDistribution::Gaussian(&j), n, s).unwrap()
            });
            let decoder = j.conditional(&["Y"], &["X"]).unwrap();
            push(
                format!("{name} E log P(Y|X)"),
                expected_log_density(&j, &["Y"], &["X"], &decoder).unwrap(),
                &|s| mc::mc_expected_log_density(&j, &["Y"], &["X"], &decoder, n, s).unwrap(),
            );
            continue;
        }
        let report = decompose_gaussian(&j).unwrap();
        let coupling = product_coupling(&j).unwrap();
        let decoder = j.conditional(&["Y"], &["T"]).unwrap();
        push(format!("{name} H(X,Y,T)"), j.entropy(&["X", "Y", "T"]).unwrap(), &|s| {
            mc::mc_entropy(&j, &["X", "Y", "T"], n, s).unwrap()
        });
        push(format!("{name} I(T;Y)"), report.i_ty_exact, &|s| {
            mc::mc_conditional_mutual_information(&j, &["T"], &["Y"], &[], n, s).unwrap()
        });
        push(format!("{name} I(Y;T|X)"), report.cmi, &|s| {
            mc::mc_conditional_mutual_information(&j, &["Y"], &["T"], &["X"], n, s).unwrap()
        });
        push(format!("{name} L(Y;T|X)"), report.clautum, &|s| {
            mc::mc_conditional_lautum(&j, &["Y"], &["T"], &["X"], n, s).unwrap()
        });
        push(
            format!("{name} E log P(Y|T) under the product coupling"),
            expected_log_density(&coupling, &["Y"], &["T"], &decoder).unwrap(),
            &|s| mc::mc_expected_log_density(&coupling, &["Y"], &["T"], &decoder, n, s).unwrap(),
        );
        push(format!("{name} bound term"), report.bound_term, &|s| mc::mc_bound_term(&j, n, s).unwrap());
    }
    out
}
