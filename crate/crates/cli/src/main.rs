//! `memfail`: simulate, extract, label, train, predict, evaluate, catalog.

mod commands;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use params::*;

#[derive(Debug, Parser)]
#[command(name = "memfail", version, about = "DIMM failure prediction from correctable-error logs")]
struct Cli {
    /// JSON config file with per-subcommand sections; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-DIMM and per-tree work
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More diagnostics on standard error
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic fleet: CE log, failures and manifest
    Simulate(SimulateParams),
    /// Compute per-CE feature vectors
    Extract(ExtractParams),
    /// Label features and draw normal-DIMM subsamples
    Label(LabelParams),
    /// Train a random forest on labeled features
    Train {
        #[command(flatten)]
        p: TrainParams,
        #[command(flatten)]
        forest: ForestFlags,
    },
    /// Per-DIMM failure verdicts
    Predict(PredictParams),
    /// Cross-validated comparison of feature modes against the CE-rate baseline
    Evaluate {
        #[command(flatten)]
        p: EvaluateParams,
        #[command(flatten)]
        forest: ForestFlags,
    },
    /// Print the feature catalog
    Catalog(CatalogParams),
}

/// Failure class, mapped to the process exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn report(err: &CliError) -> ExitCode {
    let line = serde_json::json!({ "error": err.kind(), "message": err.message() });
    eprintln!("{line}");
    ExitCode::from(err.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return report(&CliError::Usage(first.trim_start_matches("error: ").to_string()));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(p) => commands::simulate(p.or(file.simulate)),
        Command::Extract(p) => commands::extract(p.or(file.extract)),
        Command::Label(p) => commands::label(p.or(file.label)),
        Command::Train { p, forest } => commands::train(p.or(file.train), forest.or(file.forest)),
        Command::Predict(p) => commands::predict(p.or(file.predict)),
        Command::Evaluate { p, forest } => commands::evaluate(p.or(file.evaluate), forest.or(file.forest)),
        Command::Catalog(p) => commands::catalog(p.or(file.catalog)),
    })
}
