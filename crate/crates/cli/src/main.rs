//! Experiment runner CLI.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.

use clap::{Parser, Subcommand};
use spinnet_cli::config::{self, parse_config, schema_reference, ExperimentKind};
use spinnet_cli::runner;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spinnet",
    about = "Discrete-event simulator of spin-photon quantum networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Simulate {
        /// Experiment name; must match the config's `experiment` field.
        experiment: String,
        #[arg(long)]
        config: String,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output path.
        #[arg(long)]
        out: Option<String>,
    },
    /// Parse and validate a config file without running it.
    Validate {
        #[arg(long)]
        config: String,
    },
    /// Print the configuration reference.
    Schema,
}

fn experiment_from_name(name: &str) -> Option<ExperimentKind> {
    match name {
        "bell_pair_curve" => Some(ExperimentKind::BellPairCurve),
        "repeater_gen1" => Some(ExperimentKind::RepeaterGen1),
        "repeater_gen2" => Some(ExperimentKind::RepeaterGen2),
        "qkd_single_hub" => Some(ExperimentKind::QkdSingleHub),
        "qkd_two_hub" => Some(ExperimentKind::QkdTwoHub),
        "connectivity" => Some(ExperimentKind::Connectivity),
        "overhead" => Some(ExperimentKind::Overhead),
        _ => None,
    }
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn load_config(path: &str) -> Result<config::ExperimentConfig, (u8, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (EXIT_RUNTIME, format!("cannot read {path}: {e}")))?;
    parse_config(&text).map_err(|e| (EXIT_VALIDATION, e.to_string()))
}

fn simulate(
    experiment: &str,
    config_path: &str,
    seed: Option<u64>,
    out: Option<String>,
) -> Result<(), (u8, String)> {
    let requested = experiment_from_name(experiment).ok_or((
        EXIT_VALIDATION,
        format!("unknown experiment '{experiment}'"),
    ))?;
    let mut cfg = load_config(config_path)?;
    if cfg.experiment != requested {
        return Err((
            EXIT_VALIDATION,
            format!(
                "config declares experiment '{}' but '{}' was requested",
                cfg.experiment.name(),
                experiment
            ),
        ));
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.output_path = out;
    }
    let rows = runner::run_experiment(&cfg).map_err(|e| match e {
        runner::RunError::Config(e) => (EXIT_VALIDATION, e.to_string()),
        other => (EXIT_RUNTIME, other.to_string()),
    })?;
    runner::write_csv(&cfg.output_path, &rows)
        .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    eprintln!(
        "wrote {} rows to {} (seed {})",
        rows.len(),
        cfg.output_path,
        cfg.seed
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            experiment,
            config,
            seed,
            out,
        } => simulate(&experiment, &config, seed, out),
        Command::Validate { config } => load_config(&config).map(|cfg| {
            eprintln!("config is valid: experiment {}", cfg.experiment.name());
        }),
        Command::Schema => {
            print!("{}", schema_reference());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
