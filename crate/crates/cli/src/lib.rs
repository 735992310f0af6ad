//! Command-line driver: argument model, config resolution, manifests and
//! the subcommands.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod suites;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(std::io::Error),
    Core(timecrystal::Error),
    /// A validation suite reported failures.
    Failed(String),
}

impl CliError {
    /// 1 for usage and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
            CliError::Failed(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Failed(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<timecrystal::Error> for CliError {
    fn from(e: timecrystal::Error) -> Self {
        match e {
            timecrystal::Error::Io(io) => CliError::Io(io),
            other => CliError::Core(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "timecrystal", version, about = "Simulations of a driven collectively decaying spin ensemble")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Number of atoms N.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Drive strength omega/kappa.
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    /// Collective decay rate kappa (sets the units).
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Simulated time.
    #[arg(long, global = true)]
    pub t_final: Option<f64>,
    /// Integration step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Master RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite an existing run in the output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajScheme {
    Jump,
    Homodyne,
    Doob,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary magnetization over a grid of omega/kappa.
    Steady {
        /// `start:stop:step` or a comma list of omega/kappa values.
        #[arg(long)]
        grid: Option<String>,
    },
    /// One conditioned trajectory.
    Traj {
        #[arg(value_enum)]
        scheme: TrajScheme,
        /// Polar angle of the initial spin-coherent state.
        #[arg(long)]
        theta0: Option<f64>,
        /// Azimuth of the initial spin-coherent state.
        #[arg(long)]
        phi0: Option<f64>,
        /// Sampling interval of the magnetization.
        #[arg(long)]
        output_interval: Option<f64>,
        /// Counting or smoothing window.
        #[arg(long)]
        bin_window: Option<f64>,
        /// `tumbling` or `sliding`.
        #[arg(long)]
        bin_mode: Option<String>,
        /// Spacing of sliding windows.
        #[arg(long)]
        bin_step: Option<f64>,
        /// `waiting-time` or `bernoulli`.
        #[arg(long)]
        jump_method: Option<String>,
        /// Tilt for the Doob scheme.
        #[arg(long, allow_hyphen_values = true)]
        s: Option<f64>,
        /// Also write the per-step homodyne current.
        #[arg(long)]
        raw_current: bool,
    },
    /// Scaled cumulant generating function and activity over an (omega, s) grid.
    Tilt {
        /// Comma list of omega/kappa values.
        #[arg(long)]
        omega_list: Option<String>,
        /// `start:stop:step` or a comma list of tilts s.
        #[arg(long, allow_hyphen_values = true)]
        s_grid: Option<String>,
    },
    /// Doob-transformed generator at one tilt.
    Doob {
        /// Tilt s.
        #[arg(long, allow_hyphen_values = true)]
        s: Option<f64>,
    },
    /// Waiting time between large fluctuations against N, with a power-law fit.
    Scaling {
        /// `phase` or `jump`.
        #[arg(long)]
        model: Option<String>,
        /// Comma list of atom numbers.
        #[arg(long)]
        n_list: Option<String>,
        /// Events to collect per N.
        #[arg(long)]
        events: Option<usize>,
        /// An event fires when m_y drops below this level.
        #[arg(long)]
        threshold: Option<f64>,
        /// Level m_y must climb back to before the next event can fire.
        #[arg(long)]
        rearm: Option<f64>,
        /// Initial time of each realization in which no event fires.
        #[arg(long)]
        burn_in: Option<f64>,
        /// Length of one independent realization.
        #[arg(long)]
        chunk_time: Option<f64>,
        /// `waiting-time` or `bernoulli`.
        #[arg(long)]
        jump_method: Option<String>,
    },
    /// Spectrum of the binned photon-count signal.
    Spectrum {
        /// Directory of a `traj jump` run to analyse instead of simulating.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Counting window.
        #[arg(long)]
        bin_window: Option<f64>,
        /// `tumbling` or `sliding`.
        #[arg(long)]
        bin_mode: Option<String>,
        /// Spacing of sliding windows.
        #[arg(long)]
        bin_step: Option<f64>,
        /// `waiting-time` or `bernoulli`.
        #[arg(long)]
        jump_method: Option<String>,
    },
    /// Runs the oracle suites.
    Validate {
        /// `all`, `algebra`, `conservation`, `largedev` or `unraveling`.
        #[arg(long)]
        suite: Option<String>,
        /// Trajectories per scheme in the unraveling suite.
        #[arg(long)]
        trajectories: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Steady { .. } => "steady",
            Command::Traj { .. } => "traj",
            Command::Tilt { .. } => "tilt",
            Command::Doob { .. } => "doob",
            Command::Scaling { .. } => "scaling",
            Command::Spectrum { .. } => "spectrum",
            Command::Validate { .. } => "validate",
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::execute(cli)
}
