//! Command-line surface of the rate lab: argument parsing, config loading
//! and file output around the core crate.

mod commands;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rate-lab", version, about = "Spectral regularization rate experiments")]
pub struct Cli {
    /// Worker threads for replicate-parallel work; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Model flags shared by subcommands that build a Mercer model without a config file.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Eigenvalue decay exponent b.
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long = "n-trunc", default_value_t = 512)]
    pub n_trunc: usize,
    /// Output dimension.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Gaussian noise level.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// Hölder smoothness of the target.
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Source radius R.
    #[arg(long = "radius", default_value_t = 1.0)]
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterName {
    Tikhonov,
    IteratedTikhonov,
    Landweber,
    Cutoff,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleName {
    Psi,
    Theta,
    HolderPsiClosed,
    HolderThetaClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticName {
    SampleError,
    OperatorDeviation,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator on a synthetic dataset and report its errors.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 256)]
        m: usize,
        #[arg(long, value_enum, default_value_t = FilterName::Tikhonov)]
        filter: FilterName,
        #[arg(long, value_enum, default_value_t = RuleName::Psi)]
        rule: RuleName,
        /// Fixed λ; overrides the parameter rule.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error sweep over a sample-size grid with slope verdicts.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective dimension against its bounds on a λ grid.
    Effdim {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Violation frequency of a concentration inequality.
    Concentration {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = StatisticName::SampleError)]
        statistic: StatisticName,
        #[arg(long, default_value_t = 256)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 500)]
        replicates: usize,
        /// Fixed λ; defaults to the Ψ rule at `m`.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Packing, Fano bound and its Monte Carlo check.
    LowerBound {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.001)]
        epsilon: f64,
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Separate the family in the RKHS norm.
        #[arg(long)]
        rkhs_variant: bool,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the regularization-filter constants on a grid.
    Filters {
        #[arg(long, value_enum)]
        check: FilterName,
        #[arg(long, default_value_t = 1.0)]
        kappa2: f64,
        #[arg(long, default_value_t = 256)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        nu: u32,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Upper and lower rate exponents for Hölder smoothness.
    Exponents {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        r: f64,
    },
}

/// Parse `argv` and run; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match commands::dispatch(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERDICT,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
