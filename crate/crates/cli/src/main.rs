//! `msp`: generate instances, schedule them, check and replay schedules, and
//! run experiment grids.

mod commands;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use msp_core::error::MspError;

#[derive(Parser)]
#[command(name = "msp", version, about = "Drone mission scheduling with on-board analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded problem instance.
    Generate(GenerateArgs),
    /// Write a seeded synthetic road graph for depth-first workloads.
    Roadgraph(RoadgraphArgs),
    /// Run a scheduler on an instance.
    Schedule(ScheduleArgs),
    /// Validate a schedule and report its utility and energy.
    Evaluate(EvaluateArgs),
    /// Run schedulers over a grid of fleet sizes and loads.
    Experiment(ExperimentArgs),
    /// Replay a schedule under perturbed energy draw.
    Emulate(EmulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Workload {
    Rnd,
    Dfs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Jsc,
    Vrc,
    Opt,
    MilpExport,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub workload: Workload,
    /// Fleet size m.
    #[arg(long)]
    pub drones: u32,
    /// Activities per drone x.
    #[arg(long)]
    pub load: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-batch runtime, s.
    #[arg(long, default_value_t = msp_core::workloads::MNET_RUNTIME)]
    pub runtime: u64,
    /// Road graph for the dfs workload.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct RoadgraphArgs {
    #[arg(long)]
    pub vertices: usize,
    /// Radius of the disc around the depot, m.
    #[arg(long, default_value_t = 3500.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Scheduler parameters shared by `schedule` and `experiment`.
#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct SolverArgs {
    /// Battery fraction held back on every trip.
    #[arg(long, default_value_t = 0.0)]
    pub reserve: f64,
    #[arg(long, default_value_t = 3)]
    pub knn_k: usize,
    /// Clustering radius in space, m.
    #[arg(long, default_value_t = 1000.0)]
    pub eps_space: f64,
    /// Clustering radius on capture start, s.
    #[arg(long, default_value_t = 1800)]
    pub eps_time: u64,
    #[arg(long, default_value_t = 2)]
    pub min_pts: usize,
    /// Exact solver limits: activities,drones,trips,batches.
    #[arg(long, default_value = "6,2,2,8")]
    pub opt_caps: String,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also write the mixed-integer model in LP format.
    #[arg(long)]
    pub milp_out: Option<PathBuf>,
    /// Schedule file; the LP file for milp-export.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub schedule: PathBuf,
    /// Per-activity utility CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary with per-trip energy as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub suite: Workload,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,50")]
    pub drones: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    pub loads: Vec<u32>,
    #[arg(long, default_value_t = 10)]
    pub repeats: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-batch runtime, s.
    #[arg(long, default_value_t = msp_core::workloads::MNET_RUNTIME)]
    pub runtime: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct EmulateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub schedule: PathBuf,
    /// Per-leg factor CSV; replaces the noise model.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Half-width of the uniform per-leg noise around 1.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Multiplies every factor.
    #[arg(long, default_value_t = 1.0)]
    pub inflation: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, mapped to its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Malformed files or parameters.
    Input(String),
    /// Well-formed request that cannot be met.
    Infeasible(String),
    /// A schedule breaks a constraint.
    Invalid(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Invalid(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Infeasible(m) | Failure::Invalid(m) => m,
        }
    }
}

impl From<MspError> for Failure {
    fn from(e: MspError) -> Self {
        match e {
            MspError::CapsExceeded(_) | MspError::GraphExhausted { .. } => Failure::Infeasible(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Roadgraph(a) => commands::roadgraph(&a),
        Command::Schedule(a) => commands::schedule(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Experiment(a) => experiment::run(&a),
        Command::Emulate(a) => commands::emulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
