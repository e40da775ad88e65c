//! `twoway`: runs the simulator's experiments from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] twoway_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for invalid input, 1 for everything else.
    fn exit_code(&self) -> u8 {
        use twoway_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Model(
                E::Domain(_) | E::Contract(_) | E::UndefinedInput(_) | E::Divergence(_),
            ) => 2,
            CliError::Model(E::Parse { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "twoway",
    version,
    about = "Two-way single-photon communication simulator"
)]
pub struct Cli {
    /// Master seed; every command derives its own labelled substream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Flat `key = value` file supplying default flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

const SUBCOMMANDS: [&str; 5] = ["game-sweep", "protocol", "transmit", "g2", "timing"];

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Success probability of the guessing game against visibility (CSV).
    #[command(allow_negative_numbers = true)]
    GameSweep(GameSweepArgs),
    /// Interval error analytics and Monte Carlo of the repetition protocol (JSON).
    #[command(allow_negative_numbers = true)]
    Protocol(ProtocolArgs),
    /// Sends a P1 bitmap under a one-time pad; writes Bob's and Eve's pictures.
    #[command(allow_negative_numbers = true)]
    Transmit(TransmitArgs),
    /// Simulates a coincidence run and estimates the heralded g2(0) (JSON).
    #[command(allow_negative_numbers = true)]
    G2(G2Args),
    /// Arrival-time analysis of the four mirror/detector pairs (JSON).
    #[command(allow_negative_numbers = true)]
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
pub struct GameSweepArgs {
    /// Visibilities to play, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    pub vis: Vec<f64>,
    /// Photons per input setting.
    #[arg(long, default_value_t = 100_000)]
    pub photons: u64,
    /// Input settings per visibility.
    #[arg(long, default_value_t = 100)]
    pub settings: usize,
    /// Gaussian phase-noise width per arm in radians.
    #[arg(long)]
    pub phase_noise: Option<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    /// Mean detected photons per interval.
    #[arg(long)]
    pub m: Option<f64>,
    /// Per-photon probability of the correct port.
    #[arg(long, conflicts_with = "vis")]
    pub ps: Option<f64>,
    /// Interferometric visibility, used as p_s = (1 + V) / 2.
    #[arg(long)]
    pub vis: Option<f64>,
    /// Intervals per bit pair; must be odd.
    #[arg(long, default_value_t = 1)]
    pub reps: u32,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    /// Use the error-minimising mean instead of --m.
    #[arg(long, conflicts_with = "m")]
    pub optimize_m: bool,
    /// Bit pairs per set.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// Independent sets.
    #[arg(long, default_value_t = 10)]
    pub sets: usize,
    /// Per-set CSV rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransmitArgs {
    /// Input P1 bitmap.
    #[arg(long)]
    pub image: PathBuf,
    /// Bob's decoded bitmap.
    #[arg(long)]
    pub received: Option<PathBuf>,
    /// Eve's parity bitmap.
    #[arg(long)]
    pub eve: Option<PathBuf>,
    #[command(flatten)]
    pub link: LinkArgs,
    /// JSON statistics destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct G2Args {
    /// Acquisition time in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub duration_s: f64,
    /// Herald singles rate.
    #[arg(long, default_value_t = 1e5)]
    pub herald_rate_per_s: f64,
    /// Probability of a second photon per herald.
    #[arg(long, default_value_t = 0.0, conflicts_with = "target_g2")]
    pub multiphoton_rate: f64,
    /// Pick the multiphoton rate whose expected g2(0) equals this value.
    #[arg(long)]
    pub target_g2: Option<f64>,
    /// Probability that a photon reaching a detector clicks it.
    #[arg(long, default_value_t = 1.0)]
    pub detection_efficiency: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    #[arg(long, default_value_t = 1.06)]
    pub arm_a_m: f64,
    #[arg(long, default_value_t = 1.19)]
    pub arm_b_m: f64,
    /// Minimum distance between the parties.
    #[arg(long, default_value_t = 1.56)]
    pub min_distance_m: f64,
    /// Uncertainty of the minimum distance.
    #[arg(long)]
    pub distance_uncertainty_m: Option<f64>,
    /// Jitter of each detector.
    #[arg(long, default_value_t = 0.149)]
    pub jitter_ns: f64,
    /// Events per distribution.
    #[arg(long, default_value_t = 100_000)]
    pub events: usize,
    /// Mean reception time after the herald.
    #[arg(long, default_value_t = 30.0)]
    pub reception_ns: f64,
    /// Fibre between the mirror tap and its detector.
    #[arg(long)]
    pub fiber_length_m: Option<f64>,
    #[arg(long, default_value_t = 1.468)]
    pub fiber_index: f64,
    /// Override the geometric delay for every pair.
    #[arg(long)]
    pub delay_ns: Option<f64>,
    /// Analyse a time-tag CSV instead of synthesising.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Pair label of --tags.
    #[arg(long, default_value = "AB", requires = "tags")]
    pub label: String,
    /// Write the synthesised tags of every pair into this directory.
    #[arg(long, conflicts_with = "tags")]
    pub tags_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match config::merge_args(args, &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = Cli::parse_from(args);
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
