use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use super::format::{fmt_num, round_json, Csv};
use super::io::{self, digest, read_json};
use super::{
    parse_grid, BaArgs, BetaGridArgs, CliError, Command, DecomposeArgs, DvibArgs, GibArgs,
    SparseGibArgs, SweepArgs,
};
use crate::decomposition::{
    conditional_identity_gaps, decompose_discrete, decompose_gaussian, violation_profile,
    DecompositionReport, TriplePmf, SMOOTHING,
};
use crate::discrete::{info_curve_discrete, BaOptions};
use crate::dvib::{copula_transform, dvib_train, DvibOptions};
use crate::gaussian::GaussianJoint;
use crate::gib::{gib_analytic, gib_numeric, sparse_gib};
use crate::graph::{admissible_ib_dags, classify, parse_edge};
use crate::mc;
use crate::sem::{LinearGaussianSem, Scenario, SemDoc};

type Out = Result<String, CliError>;

const SPARSE_TOL: f64 = 1e-15;

pub(super) fn dispatch(cmd: &Command) -> Out {
    match cmd {
        Command::Dags { json } => dags(*json),
        Command::Gib(a) => gib(a),
        Command::SparseGib(a) => sparse(a),
        Command::Ba(a) => ba(a),
        Command::Dvib(a) => dvib(a),
        Command::Decompose(a) => decompose(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn betas(g: &BetaGridArgs) -> Result<Vec<f64>, CliError> {
    parse_grid(&g.beta_grid, g.log_beta)
}

fn load_joint(path: &Path) -> Result<(GaussianJoint, String), CliError> {
    read_json(path)
}

fn pretty(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_json(v)).expect("JSON values serialise");
    s.push('\n');
    s
}

fn dags(as_json: bool) -> Out {
    let dags = admissible_ib_dags();
    if as_json {
        let entries: Vec<Value> = dags
            .iter()
            .map(|(d, c)| {
                let edges: Vec<String> = d.edges().map(|(u, v)| format!("{u}->{v}")).collect();
                json!({"class": c.label(), "edges": edges, "both_chains": classify(d).both_chains})
            })
            .collect();
        return Ok(pretty(Value::Array(entries)));
    }
    let mut text = String::from("class\tedges\n");
    for (d, c) in &dags {
        text.push_str(&format!("{}\t{d}\n", c.label()));
    }
    Ok(text)
}

/// Projection, `(I(X;T), I(T;Y))` and rank of one bottleneck solution.
struct Projection {
    a: DMatrix<f64>,
    i_xt: f64,
    i_ty: f64,
    rank: usize,
}

fn projection(joint: &GaussianJoint, beta: f64, sparse: bool) -> Result<Projection, CliError> {
    if sparse {
        let s = sparse_gib(joint, beta, SPARSE_TOL)?;
        let a = DMatrix::from_diagonal(&DVector::from_iterator(s.d.len(), s.d.iter().map(|d| d.sqrt())));
        return Ok(Projection { a, i_xt: s.i_xt, i_ty: s.i_ty, rank: s.rank() });
    }
    let s = gib_analytic(joint, beta)?;
    let rank = s.rank();
    Ok(Projection { a: s.a, i_xt: s.i_xt, i_ty: s.i_ty, rank })
}

fn matrix_rows(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}

fn gib(a: &GibArgs) -> Out {
    let (joint, _) = load_joint(&a.cov)?;
    let grid = betas(&a.grid)?;
    let t_dim = joint.block_dim("X")?;
    if a.json {
        let mut entries = Vec::with_capacity(grid.len());
        for beta in grid {
            let p = projection(&joint, beta, a.sparse)?;
            let mut entry = json!({"beta": beta, "i_xt": p.i_xt, "i_ty": p.i_ty, "rank": p.rank, "a": matrix_rows(&p.a)});
            if a.numeric {
                let n = gib_numeric(&joint, beta, t_dim, a.seed, a.tol)?;
                entry["numeric_objective"] = json!(n.objective);
                entry["numeric_a"] = matrix_rows(&n.solution.a);
            }
            entries.push(entry);
        }
        return Ok(pretty(Value::Array(entries)));
    }
    let mut header = vec!["beta", "i_xt", "i_ty", "rank"];
    if a.numeric {
        header.extend(["objective", "numeric_objective", "numeric_converged"]);
    }
    let mut csv = Csv::new(&header);
    for beta in grid {
        let p = projection(&joint, beta, a.sparse)?;
        let mut row = vec![fmt_num(beta), fmt_num(p.i_xt), fmt_num(p.i_ty), p.rank.to_string()];
        if a.numeric {
            let n = gib_numeric(&joint, beta, t_dim, a.seed, a.tol)?;
            row.extend([fmt_num(p.i_xt - beta * p.i_ty), fmt_num(n.objective), n.converged.to_string()]);
        }
        csv.row(row);
    }
    Ok(csv.finish())
}

fn sparse(a: &SparseGibArgs) -> Out {
    let (joint, _) = load_joint(&a.cov)?;
    let dx = joint.block_dim("X")?;
    let d_names: Vec<String> = (1..=dx).map(|i| format!("d{i}")).collect();
    let mut header = vec!["beta", "i_xt", "i_ty", "rank", "kkt_violation", "converged"];
    header.extend(d_names.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for beta in betas(&a.grid)? {
        let s = sparse_gib(&joint, beta, a.tol)?;
        let mut row = vec![
            fmt_num(beta),
            fmt_num(s.i_xt),
            fmt_num(s.i_ty),
            s.rank().to_string(),
            fmt_num(s.kkt_violation),
            s.converged.to_string(),
        ];
        row.extend(s.d.iter().map(|d| fmt_num(*d)));
        csv.row(row);
    }
    Ok(csv.finish())
}

fn ba(a: &BaArgs) -> Out {
    let (joint, _) = io::read_pair_pmf(&a.pmf)?;
    let opts = BaOptions { tol: a.tol, max_iter: a.max_iter };
    let curve = info_curve_discrete(&joint, a.t_card, &betas(&a.grid)?, a.seed, opts, a.warm_start)?;
    let mut csv = Csv::new(&["beta", "i_xt", "i_ty", "converged"]);
    for p in curve {
        csv.row(vec![fmt_num(p.beta), fmt_num(p.i_xt), fmt_num(p.i_ty), p.converged.to_string()]);
    }
    Ok(csv.finish())
}

fn joint_from_data(path: &Path, y_cols: usize, copula: bool) -> Result<GaussianJoint, CliError> {
    let (mut data, _) = io::read_data_csv(path)?;
    let d = data.ncols();
    if y_cols == 0 || y_cols >= d {
        return Err(CliError::Input(format!("--y-cols must be in 1..{d} for {d} data columns")));
    }
    if copula {
        data = copula_transform(&data)?;
    }
    let cov = io::sample_covariance(&data)?;
    Ok(GaussianJoint::new(vec![("X", d - y_cols), ("Y", y_cols)], cov)?)
}

fn dvib(a: &DvibArgs) -> Out {
    let joint = match (&a.cov, &a.data) {
        (Some(p), _) => load_joint(p)?.0,
        (None, Some(p)) => joint_from_data(p, a.y_cols, a.copula)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let t_dim = a.t_dim.unwrap_or(joint.block_dim("X")?);
    let h_y = joint.entropy(&["Y"])?;
    let opts = DvibOptions { lr: a.lr, tol: a.tol, max_iter: a.max_iter };
    let mut csv = Csv::new(&["beta", "i_xt", "i_ty_bound", "converged"]);
    for beta in betas(&a.grid)? {
        let r = dvib_train(&joint, beta, t_dim, a.seed, opts)?;
        let bound = r.objective.i_ty_bound_term - if a.drop_hy { h_y } else { 0.0 };
        csv.row(vec![
            fmt_num(beta),
            fmt_num(r.objective.i_xt_term),
            fmt_num(bound),
            r.converged.to_string(),
        ]);
    }
    Ok(csv.finish())
}

enum Source {
    Gaussian { joint: GaussianJoint, sem: Option<LinearGaussianSem> },
    Pmf(TriplePmf),
}

fn load_source(a: &DecomposeArgs) -> Result<(Source, String), CliError> {
    if let Some(p) = &a.sem {
        let (doc, d): (SemDoc, String) = read_json(p)?;
        let sem = LinearGaussianSem::try_from(doc)?;
        return Ok((Source::Gaussian { joint: sem.build_joint()?, sem: Some(sem) }, d));
    }
    if let Some(p) = &a.cov {
        let (joint, d) = load_joint(p)?;
        return Ok((Source::Gaussian { joint, sem: None }, d));
    }
    if let Some(p) = &a.pmf {
        let (pmf, d) = read_json(p)?;
        return Ok((Source::Pmf(pmf), d));
    }
    let name = a.scenario.as_deref().expect("clap requires one source");
    let scenario = Scenario::from_name(name)
        .ok_or_else(|| CliError::Input(format!("unknown scenario `{name}`")))?;
    let sem = scenario.sem();
    let canonical = serde_json::to_vec(&SemDoc::from(&sem)).expect("model serialises");
    Ok((Source::Gaussian { joint: sem.build_joint()?, sem: Some(sem) }, digest(&canonical)))
}

fn decompose(a: &DecomposeArgs) -> Out {
    let (source, input_digest) = load_source(a)?;
    if let Some(spec) = &a.grid {
        let Source::Gaussian { sem: Some(sem), .. } = &source else {
            return Err(CliError::Input("--grid needs a model given by --sem or --scenario".into()));
        };
        let (edge, range) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("grid `{spec}` is not of the form EDGE=A:B:N")))?;
        let edge = parse_edge(edge.trim())?;
        let rows = violation_profile(sem, edge, &parse_grid(range, false)?)?;
        let mut csv = Csv::new(&["param", "txy_violation", "xty_violation", "i_ty_exact"]);
        for r in rows {
            csv.row(vec![
                fmt_num(r.param),
                fmt_num(r.txy_violation),
                fmt_num(r.xty_violation),
                fmt_num(r.i_ty_exact),
            ]);
        }
        return Ok(csv.finish());
    }
    let report = match &source {
        Source::Gaussian { joint, .. } => decompose_gaussian(joint)?,
        Source::Pmf(pmf) => decompose_discrete(pmf, a.smooth.then_some(SMOOTHING))?,
    };
    if a.table2 {
        return Ok(render_table2(&report));
    }
    let mut doc = match serde_json::to_value(report).expect("report serialises") {
        Value::Object(m) => m,
        _ => unreachable!("report is a struct"),
    };
    doc.insert("input_digest".into(), Value::String(input_digest));
    if a.validate {
        let block = match &source {
            Source::Gaussian { joint, .. } => validate_gaussian(joint, &report, a.samples, a.seed)?,
            Source::Pmf(pmf) => {
                let pmf = if a.smooth { pmf.smoothed(SMOOTHING) } else { pmf.clone() };
                let worst = conditional_identity_gaps(&pmf)?.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                json!({"identity_gap_max": worst, "pass": worst < 1e-12})
            }
        };
        doc.insert("validation".into(), block);
    }
    Ok(pretty(Value::Object(doc)))
}

fn validate_gaussian(joint: &GaussianJoint, r: &DecompositionReport, n: usize, seed: u64) -> Result<Value, CliError> {
    let checks = [
        ("bound_term", r.bound_term, mc::mc_bound_term(joint, n, seed)?),
        ("cmi", r.cmi, mc::mc_conditional_mutual_information(joint, &["Y"], &["T"], &["X"], n, seed)?),
        ("clautum", r.clautum, mc::mc_conditional_lautum(joint, &["Y"], &["T"], &["X"], n, seed)?),
        ("h_y", r.h_y, mc::mc_entropy(joint, &["Y"], n, seed)?),
        ("i_ty_exact", r.i_ty_exact, mc::mc_conditional_mutual_information(joint, &["T"], &["Y"], &[], n, seed)?),
    ];
    let items: Vec<Value> = checks
        .iter()
        .map(|(name, closed, est)| {
            json!({
                "quantity": name,
                "closed_form": closed,
                "estimate": est.value,
                "std_error": est.std_error,
                "pass": est.agrees_with(*closed, 3.0),
            })
        })
        .collect();
    let mut block = Map::new();
    block.insert("n".into(), json!(n));
    block.insert("seed".into(), json!(seed));
    block.insert("checks".into(), Value::Array(items));
    Ok(Value::Object(block))
}

fn render_table2(r: &DecompositionReport) -> String {
    let ib = r.bound_term + r.cmi + r.clautum;
    let dvib = r.bound_term;
    let rows = [
        ("E log P(Y|T) + H(Y)", fmt_num(r.bound_term), fmt_num(r.bound_term)),
        ("I(Y;T|X)", fmt_num(r.cmi), "-".to_string()),
        ("L(Y;T|X)", fmt_num(r.clautum), "-".to_string()),
        ("optimised term", fmt_num(ib), fmt_num(dvib)),
        ("difference", fmt_num(ib - dvib), String::new()),
    ];
    let mut text = String::from("Optimised term corresponding to I(T;Y)\n");
    text.push_str(&format!("{:<22}{:>18}{:>18}\n", "term", "IB", "DVIB"));
    for (name, left, right) in rows {
        text.push_str(&format!("{name:<22}{left:>18}{right:>18}\n"));
    }
    text
}

/// Side-by-side rendering of the term the original bottleneck and the
/// variational bottleneck each optimise in place of `I(T;Y)`; the two
/// columns differ by `cmi + clautum`.
pub fn report_table2(joint: &GaussianJoint) -> Result<String, CliError> {
    Ok(render_table2(&decompose_gaussian(joint)?))
}

fn sweep(a: &SweepArgs) -> Out {
    let (joint, _) = load_joint(&a.cov)?;
    let t_dim = a.t_dim.unwrap_or(joint.block_dim("X")?);
    let mut csv = Csv::new(&["beta", "gib_i_xt", "gib_i_ty", "dvib_i_xt", "dvib_i_ty_bound", "converged"]);
    for beta in betas(&a.grid)? {
        let g = gib_analytic(&joint, beta)?;
        let d = dvib_train(&joint, beta, t_dim, a.seed, DvibOptions::default())?;
        csv.row(vec![
            fmt_num(beta),
            fmt_num(g.i_xt),
            fmt_num(g.i_ty),
            fmt_num(d.objective.i_xt_term),
            fmt_num(d.objective.i_ty_bound_term),
            d.converged.to_string(),
        ]);
    }
    Ok(csv.finish())
}
