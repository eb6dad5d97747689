mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigArgs, RunConfig};

/// Infers which of 24 interest topics a user cares about from the labels an
/// image classifier assigned to their photos.
#[derive(Debug, Parser)]
#[command(name = "visinterest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a taxonomy and report errors and warnings.
    ValidateOntology,
    /// Compute size, structural and semiotic metrics of a taxonomy.
    Metrics,
    /// Write image-level topic scores for both mechanisms.
    Score,
    /// Build per-user interest profiles, including the images sweep.
    Profile,
    /// Topic-topic Pearson correlation and co-interest matrices.
    Correlate,
    /// Compare predicted topics with self-assessed labels.
    Evaluate,
    /// Generate a seeded synthetic dataset with labels.
    Fixture,
    /// Run metrics, scoring, profiling, correlation and evaluation in one go.
    Pipeline,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input data or taxonomy; exit code 1.
    Validation(String),
    /// Bad configuration or arguments; exit code 2.
    Config(String),
    /// Missing or unwritable files; exit code 2.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn run(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::ValidateOntology => commands::validate_ontology(cfg),
        Command::Metrics => commands::metrics(cfg),
        Command::Score => commands::score(cfg),
        Command::Profile => commands::profile(cfg),
        Command::Correlate => commands::correlate(cfg),
        Command::Evaluate => commands::evaluate_cmd(cfg),
        Command::Fixture => commands::fixture(cfg),
        Command::Pipeline => commands::pipeline(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.config.resolve().and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(|| run(&cli.command, &cfg))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
