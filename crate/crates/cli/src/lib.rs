//! The `critdelay` command line: argument definitions and subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod output;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(
    name = "critdelay",
    version,
    about = "Critical delays of linear delay-differential equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the free phases of a multi-delay model.
    Sweep {
        /// Model file (JSON).
        model: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Critical delays along the ray h*(n_1, ..., n_m).
    Commensurate {
        /// Model file (JSON).
        model: PathBuf,
        /// Positive integer multiples, one per delay.
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        direction: Vec<i64>,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Closed-form sweep of a scalar system a0, a1, ..., a_m.
    Scalar {
        /// Coefficients a0 a1 ... a_m.
        #[arg(long = "a", num_args = 1.., required = true, allow_negative_numbers = true)]
        coeffs: Vec<f64>,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Recompute the residual oracle for candidate rows (columns h_1..h_m, omega).
    Verify {
        model: PathBuf,
        /// CSV with an omega column and h_1..h_m; other columns are ignored.
        candidates: PathBuf,
        /// Residual bound [default: 1e-6*(1 + max_k ||A_k||_2)].
        #[arg(long)]
        residual_tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the discretized heated-rod model.
    GenHeat {
        /// Number of grid nodes.
        #[arg(long)]
        n: usize,
        /// Reaction coefficient.
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        /// Feedback gains, one per delay.
        #[arg(long, num_args = 3, default_values_t = [4.0, 10.0, 4.0])]
        kappa: Vec<f64>,
        /// Feedback positions in (0, 1).
        #[arg(long, num_args = 3, default_values_t = [1.0 / 3.0, 0.5, 0.75])]
        positions: Vec<f64>,
        /// Output file [default: stdout].
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Grid, tolerance and output flags shared by the solving subcommands.
#[derive(Debug, Clone, Args)]
pub struct SolveOpts {
    /// Grid step for each free phase [default: 2*pi/629].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Branch bound: indices run over -pmax..=pmax [default: 2].
    #[arg(long)]
    pub pmax: Option<u32>,
    /// Largest reported delay [default: 20].
    #[arg(long)]
    pub hmax: Option<f64>,
    /// Unit-circle tolerance [default: sqrt(eps)].
    #[arg(long)]
    pub unit_tol: Option<f64>,
    /// Realness tolerance for omega [default: 1e-6].
    #[arg(long)]
    pub omega_tol: Option<f64>,
    /// Residual bound [default: 1e-6*(1 + max_k ||A_k||_2)].
    #[arg(long)]
    pub residual_tol: Option<f64>,
    /// Rank-one acceptance bound [default: 1e-4].
    #[arg(long)]
    pub rank_tol: Option<f64>,
    /// Locate unit eigenvalues via the Cayley transform.
    #[arg(long)]
    pub cayley: bool,
    /// Skip polishing the linearization eigenvalues on the matrix polynomial.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads; falls back to CRITDELAY_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write the run report as JSON to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}
