//! Command-line front end.
//!
//! Every subcommand renders its whole output in memory, then writes it either
//! to standard output or atomically to `--out`. Exit status is 0 on success,
//! 1 for input errors and 2 for numerical failures.

mod commands;
pub mod format;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::error::IbError;

pub use commands::report_table2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Lib(#[from] IbError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

/// Information bottleneck models and the Markov-violation decomposition of
/// I(T;Y).
#[derive(Debug, Parser)]
#[command(name = "ib-lab", version)]
pub struct RunConfig {
    /// Write the output here (atomically) instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the admissible bottleneck DAGs over X, Y, T, classified by the
    /// Markov chain they entail: T-X-Y (T independent of Y given X) or X-T-Y
    /// (X independent of Y given T).
    Dags {
        /// Emit JSON instead of a text table.
        #[arg(long)]
        json: bool,
    },
    /// Gaussian bottleneck: minimise I(X;T) - β I(T;Y) over noisy linear
    /// projections T = AX + ξ, solved through the eigenvectors of
    /// Σ_X|Y Σ_X⁻¹. CSV columns: beta,i_xt,i_ty,rank.
    Gib(GibArgs),
    /// Sparse Gaussian bottleneck: the same objective restricted to diagonal
    /// projections, optimised over the non-negative squared diagonal.
    SparseGib(SparseGibArgs),
    /// Discrete bottleneck by Blahut-Arimoto iteration of
    /// p(t|x) ∝ p(t) exp(-β KL(p(y|x) || p(y|t))).
    Ba(BaArgs),
    /// Linear-Gaussian variational bottleneck: minimise
    /// E_X KL(P(T|X) || P(T)) - β (E log Q(Y|T) + H(Y)) by gradient descent.
    /// CSV columns: beta,i_xt,i_ty_bound,converged.
    Dvib(DvibArgs),
    /// Decompose I(T;Y) into the decoder bound E log P(Y|T) + H(Y), the
    /// conditional mutual information I(Y;T|X), the conditional lautum
    /// information L(Y;T|X) and the residual that remains when X and Y are
    /// dependent given T.
    Decompose(DecomposeArgs),
    /// Trace the Gaussian bottleneck information curve next to the trained
    /// variational bottleneck on the same β grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BetaGridArgs {
    /// β grid `start:stop:count`, endpoints inclusive.
    #[arg(long = "beta-grid", value_name = "A:B:N")]
    pub beta_grid: String,
    /// Space the grid logarithmically instead of linearly.
    #[arg(long = "log-beta")]
    pub log_beta: bool,
}

#[derive(Debug, Args)]
pub struct GibArgs {
    /// Covariance JSON with blocks X and Y.
    #[arg(long)]
    pub cov: PathBuf,
    #[command(flatten)]
    pub grid: BetaGridArgs,
    /// Also run the multi-start numeric optimiser and report its objective
    /// next to the analytic one.
    #[arg(long, conflicts_with = "sparse")]
    pub numeric: bool,
    /// Restrict the projection to diagonal matrices.
    #[arg(long)]
    pub sparse: bool,
    /// Emit a JSON list of solutions including the projection matrices.
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SparseGibArgs {
    /// Covariance JSON with blocks X and Y.
    #[arg(long)]
    pub cov: PathBuf,
    #[command(flatten)]
    pub grid: BetaGridArgs,
    #[arg(long, default_value_t = 1e-15)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BaArgs {
    /// Two-way pmf JSON `{"p": [[...], ...]}` with rows indexed by x.
    #[arg(long)]
    pub pmf: PathBuf,
    /// Cardinality of T.
    #[arg(long = "t-card")]
    pub t_card: usize,
    #[command(flatten)]
    pub grid: BetaGridArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start every β from the previous β's encoder.
    #[arg(long = "warm-start")]
    pub warm_start: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("dvib_source").required(true).args(["cov", "data"])))]
pub struct DvibArgs {
    /// Covariance JSON with blocks X and Y.
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Data CSV with a header row, one column per feature; the last
    /// `--y-cols` columns form Y.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long = "y-cols", default_value_t = 1)]
    pub y_cols: usize,
    /// Rank-Gaussianise every data column before estimating the covariance.
    #[arg(long)]
    pub copula: bool,
    #[command(flatten)]
    pub grid: BetaGridArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dimension of T; defaults to dim X.
    #[arg(long = "t-dim")]
    pub t_dim: Option<usize>,
    /// Report the bound without the H(Y) term.
    #[arg(long = "drop-hy")]
    pub drop_hy: bool,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("decompose_source").required(true).args(["sem", "cov", "pmf", "scenario"])))]
pub struct DecomposeArgs {
    /// Structural equation model JSON.
    #[arg(long)]
    pub sem: Option<PathBuf>,
    /// Covariance JSON with blocks X, Y and T.
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Three-way pmf JSON `{"p": [[[...]]]}` indexed p[x][y][t].
    #[arg(long)]
    pub pmf: Option<PathBuf>,
    /// Built-in unit model: chain_txy, chain_xty, confounded or y_into_t.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Add 1e-9 to every pmf entry and renormalise before decomposing.
    #[arg(long)]
    pub smooth: bool,
    /// Cross-check the closed forms by Monte Carlo and append the results.
    #[arg(long)]
    pub validate: bool,
    #[arg(long, default_value_t = crate::mc::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Render the side-by-side comparison of the term each method optimises
    /// in place of I(T;Y).
    #[arg(long)]
    pub table2: bool,
    /// Sweep one edge coefficient, e.g. `T->Y=0:1.5:16`; emits CSV
    /// param,txy_violation,xty_violation,i_ty_exact.
    #[arg(long, value_name = "EDGE=A:B:N")]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Covariance JSON with blocks X and Y.
    #[arg(long)]
    pub cov: PathBuf,
    #[command(flatten)]
    pub grid: BetaGridArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dimension of T; defaults to dim X.
    #[arg(long = "t-dim")]
    pub t_dim: Option<usize>,
}

/// Parses `start:stop:count` into an inclusive grid.
pub fn parse_grid(spec: &str, log: bool) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("grid `{spec}` is not of the form start:stop:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(CliError::Input(format!("grid `{spec}` needs finite endpoints and count >= 1")));
    }
    if log && (a <= 0.0 || b <= 0.0) {
        return Err(CliError::Input(format!("log grid `{spec}` needs positive endpoints")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            if i == n - 1 {
                b
            } else if log {
                (a.ln() + s * (b.ln() - a.ln())).exp()
            } else {
                a + s * (b - a)
            }
        })
        .collect())
}

/// Runs a parsed configuration and returns the rendered output.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    commands::dispatch(&config.command)
}

/// Full CLI entry point; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = execute(&config).and_then(|text| match &config.out {
        Some(path) => io::write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ib-lab: {e}");
            e.exit_code()
        }
    }
}
