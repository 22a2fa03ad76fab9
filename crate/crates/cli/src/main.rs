//! `dmon3p`: generate benchmarks, build topological inputs, train, ablate
//! and evaluate.
//!
//! Exit codes: 0 success, 1 output failure, 2 invalid input, 3 numerical
//! failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "dmon3p",
    version,
    about = "Differentiable tripartite modularity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed of the spec or config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "dmon3p-out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-partition benchmark from a spec JSON.
    Generate { spec: PathBuf },
    /// Project parcel contiguity onto buildings and encode positions.
    BuildTopo {
        /// `parcel_i<TAB>parcel_j<TAB>length_m`
        adjacency: PathBuf,
        /// `building_id<TAB>parcel_id[<TAB>weight]`
        incidence: PathBuf,
        /// `node_id,x,y`
        positions: PathBuf,
        /// Number of Fourier frequencies per coordinate.
        #[arg(long, default_value_t = 4)]
        frequencies: usize,
    },
    /// Train soft assignments on a graph directory.
    Train {
        graph_dir: PathBuf,
        #[command(flatten)]
        config: commands::ConfigArgs,
    },
    /// Train with and without degree-based pivot weights and compare.
    Ablate {
        graph_dir: PathBuf,
        #[command(flatten)]
        config: commands::ConfigArgs,
    },
    /// Compare hard assignments with ground truth.
    Eval {
        assignments: PathBuf,
        truth: PathBuf,
        #[arg(long, default_value_t = dmon3p::metrics::DEFAULT_MASS_THRESHOLD)]
        mass_threshold: f64,
    },
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Output(m) => m,
        }
    }
}

impl From<dmon3p::Error> for CliError {
    fn from(e: dmon3p::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub struct Globals {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", cli.out.display())))?;
    let g = Globals {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
    };
    match cli.command {
        Command::Generate { spec } => commands::generate(&g, &spec),
        Command::BuildTopo {
            adjacency,
            incidence,
            positions,
            frequencies,
        } => commands::build_topo(&g, &adjacency, &incidence, &positions, frequencies),
        Command::Train { graph_dir, config } => commands::train(&g, &graph_dir, &config),
        Command::Ablate { graph_dir, config } => commands::ablate(&g, &graph_dir, &config),
        Command::Eval {
            assignments,
            truth,
            mass_threshold,
        } => commands::eval(&g, &assignments, &truth, mass_threshold),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
