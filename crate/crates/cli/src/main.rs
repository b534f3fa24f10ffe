//! `mgcp`: evaluate, simulate and verify the gamma-subordinated multivariate
//! counting process from the command line.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 configuration or argument
//! error, 3 numeric non-convergence.

mod commands;
mod config;
mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mgcp_core::{Execution, MgcpError};

use config::ConfigFile;
use table::Format;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Argument(String),
    NonConvergence(String),
    Verification(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Argument(m) => write!(f, "argument error: {m}"),
            CliError::NonConvergence(m) => write!(f, "numeric failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Argument(_) | CliError::Io(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl From<MgcpError> for CliError {
    fn from(e: MgcpError) -> Self {
        match e {
            MgcpError::NonConvergence { .. } | MgcpError::Conditioning(_) => CliError::NonConvergence(e.to_string()),
            MgcpError::InvalidParameter { .. } => CliError::Config(e.to_string()),
            _ => CliError::Argument(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mgcp", version, about = "Gamma-subordinated multivariate counting process toolkit")]
struct Cli {
    /// JSON configuration; omitted sections use the baseline parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `mc.samples`.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Overrides `mc.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimTarget {
    Subordinator,
    Tc,
    Survival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    All,
    Analytic,
    Mc,
    Pde,
    Shock,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint pmf of the time-changed process over all states with total ≤ max-total.
    Pmf {
        #[arg(long = "t", default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 10)]
        max_total: u64,
    },
    /// Probability generating function at one point.
    Pgf {
        /// Comma-separated, one entry per component.
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        #[arg(long = "t", default_value_t = 1.0)]
        t: f64,
    },
    /// Laplace transform of the subordinator at one point.
    Lst {
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<f64>,
        #[arg(long = "t", default_value_t = 1.0)]
        t: f64,
    },
    /// Survival function of the failure time on a grid.
    Survival {
        /// `start:stop:step`
        #[arg(long, default_value = "0:5:0.1")]
        grid: String,
        /// Also write a matplotlib script that plots the table (needs --out and csv).
        #[arg(long)]
        plot_script: Option<PathBuf>,
    },
    /// Hazard rate of a jump of size l in component r from state n.
    Hazard {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        /// Component, counted from 1.
        #[arg(long)]
        r: usize,
        #[arg(long)]
        l: u64,
        #[arg(long = "t", default_value_t = 1.0)]
        t: f64,
    },
    /// Failure sub-densities per component on a grid.
    Subdensity {
        #[arg(long, default_value = "0:5:0.1")]
        grid: String,
        /// Restrict to one component, counted from 1.
        #[arg(long)]
        r: Option<usize>,
    },
    /// Probability that failure is caused by each component.
    Cause {
        #[arg(long)]
        r: Option<usize>,
    },
    /// Monte Carlo estimates next to the analytic values.
    Simulate {
        #[arg(long, value_enum, default_value_t = SimTarget::Tc)]
        target: SimTarget,
        #[arg(long = "t", default_value_t = 1.0)]
        t: f64,
    },
    /// Run a verification suite; exits 1 if any check fails.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(samples) = cli.samples {
        cfg.mc.samples = samples;
    }
    if let Some(workers) = cli.workers {
        cfg.mc.workers = Some(workers);
    }
    if cli.sequential {
        cfg.mc.execution = Execution::Sequential;
    }
    let setup = cfg.setup()?;

    let outcome = match cli.command {
        Command::Pmf { t, max_total } => commands::pmf(&setup, t, max_total),
        Command::Pgf { u, t } => commands::pgf(&setup, &u, t),
        Command::Lst { s, t } => commands::lst(&setup, &s, t),
        Command::Survival { grid, plot_script } => {
            if plot_script.is_some() && (cli.out.is_none() || cli.format != Format::Csv) {
                return Err(CliError::Argument("--plot-script needs --out and csv output".into()));
            }
            let outcome = commands::survival(&setup, &commands::parse_grid(&grid)?);
            if let (Some(script), Some(out)) = (plot_script, &cli.out) {
                commands::write_plot_script(&script, out)?;
            }
            outcome
        }
        Command::Hazard { n, r, l, t } => commands::hazard(&setup, &n, r, l, t),
        Command::Subdensity { grid, r } => commands::subdensity(&setup, &commands::parse_grid(&grid)?, r),
        Command::Cause { r } => commands::cause(&setup, r),
        Command::Simulate { target, t } => commands::simulate(&setup, target, t),
        Command::Verify { suite } => commands::verify(&setup, suite),
    }?;

    match &cli.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            outcome.table.write(cli.format, &mut w).map_err(|e| CliError::Io(e.to_string()))?;
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            outcome
                .table
                .write(cli.format, stdout.lock())
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    match outcome.failure {
        Some(msg) => Err(CliError::Verification(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mgcp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
