use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(
    name = "overlap-witness",
    version,
    about = "Overlap-based coherence and dimension witnesses"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// Master seed; every random quantity is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of Monte-Carlo trials, sets, photons or unitaries (per command).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Random restarts of the state search.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Tolerance (SDP stopping tolerance, or classification slack for `evaluate`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "OVERLAP_WITNESS_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Evaluate an inequality on overlaps or states and classify the value.
    Evaluate(commands::EvaluateArgs),
    /// Maximal values of h_n per dimension.
    Table(commands::TableArgs),
    /// Interrogation efficiencies and their robustness to depolarization.
    Interrogation(commands::InterrogationArgs),
    /// Evaluate an inequality on Haar-random state sets.
    Sample(commands::SampleArgs),
    /// Write one of the built-in state sets.
    States(commands::StatesArgs),
    /// Interferometer simulation.
    #[command(subcommand)]
    Mesh(commands::MeshCommand),
    /// Re-run the command recorded in a manifest.
    Replay(commands::ReplayArgs),
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Evaluate(_) => "evaluate".into(),
            Command::Table(_) => "table".into(),
            Command::Interrogation(_) => "interrogation".into(),
            Command::Sample(_) => "sample".into(),
            Command::States(_) => "states".into(),
            Command::Mesh(m) => format!("mesh {}", m.name()),
            Command::Replay(_) => "replay".into(),
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<overlap_witness::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match commands::run(cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
