use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{env, fs};

use clap::{Parser, Subcommand};
use genedrift::experiment::{run_experiment, ExperimentConfig, ExperimentError, Mode};
use log::info;

/// Overrides `output_dir` from the config file when set.
const OUTPUT_DIR_VAR: &str = "GENEDRIFT_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "genedrift", version, about = "Random genetic drift in mass-transport variables")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Advance one simulation to the final time
    Run(Args),
    /// Errors and convergence orders under spatial refinement
    EocSpace(Args),
    /// Errors and convergence orders under time-step refinement
    EocTime(Args),
    /// Theoretical and computed jump locations for a set of cases
    JumpTable(Args),
    /// Distance to the steady state and its exponential decay rate
    Decay(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Plain-text `key = value` config file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
}

impl Verb {
    fn split(self) -> (Mode, Args) {
        match self {
            Verb::Run(a) => (Mode::Run, a),
            Verb::EocSpace(a) => (Mode::EocSpace, a),
            Verb::EocTime(a) => (Mode::EocTime, a),
            Verb::JumpTable(a) => (Mode::JumpTable, a),
            Verb::Decay(a) => (Mode::Decay, a),
        }
    }
}

enum Failure {
    Config(String),
    Solver(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Other(m) => m,
        }
    }
}

fn load(path: &Path, mode: Mode) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if config.mode != mode {
        info!("config asks for mode {}, running {mode}", config.mode);
    }
    config.mode = mode;
    if let Some(dir) = env::var_os(OUTPUT_DIR_VAR).filter(|d| !d.is_empty()) {
        config.output_dir = PathBuf::from(dir);
    }
    Ok(config)
}

fn execute(verb: Verb) -> Result<(), Failure> {
    let (mode, args) = verb.split();
    let config = load(&args.config, mode)?;
    info!("{mode}: n = {}, tau = {}, t_final = {}", config.n, config.tau, config.t_final);
    let report = run_experiment(&config).map_err(|e| match e {
        ExperimentError::Config(_) | ExperimentError::Model(_) => Failure::Config(e.to_string()),
        ExperimentError::Solver(_) => Failure::Solver(e.to_string()),
        _ => Failure::Other(e.to_string()),
    })?;
    for line in &report.summary {
        println!("{line}");
    }
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
