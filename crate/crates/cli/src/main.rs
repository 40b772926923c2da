use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod plot;
mod report;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "asl", version, about = "Adaptive social learning experiments: exponents, designs and simulations")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; relative to the working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PiChoice {
    /// Perron eigenvector of the configured combination matrix.
    Network,
    Uniform,
    Design,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify agents and report non-cooperative exponents and bounds.
    Classify,
    /// Error exponent of a Perron vector.
    Exponent {
        /// Take the Perron vector from here instead of the config.
        #[arg(long, value_enum, conflicts_with = "pi_file")]
        pi: Option<PiChoice>,
        /// Whitespace-separated Perron weights.
        #[arg(long)]
        pi_file: Option<PathBuf>,
    },
    /// Optimal Perron eigenvector design.
    Design {
        /// Also write a combination matrix on the configured topology with
        /// the designed Perron vector.
        #[arg(long)]
        emit_matrix: bool,
    },
    /// Monte Carlo error curves, steady-state fit and adaptation times.
    Simulate,
    /// Generate the configured topology and combination matrix.
    GraphGen,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let ctx = commands::Context::load(&path, cli.seed, cli.out, cli.format)?;
    match cli.command {
        Command::Classify => ctx.classify(),
        Command::Exponent { pi, pi_file } => ctx.exponent(pi, pi_file),
        Command::Design { emit_matrix } => ctx.design(emit_matrix),
        Command::Simulate => ctx.simulate(),
        Command::GraphGen => ctx.graph_gen(),
    }
}
