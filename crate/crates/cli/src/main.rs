use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lorenz_shadow::Case;
use lorenz_shadow_cli::{
    run_build_pseudo, run_falsify, run_model_check, CliError, ExperimentConfig, Outcome, Overrides,
};

/// Numerical falsification of shadowing properties for the geometric Lorenz flow.
///
/// Exit status: 0 pass, 1 experiment failure, 2 usage or configuration error.
/// LORENZ_SHADOW_THREADS caps the optimizer's thread count.
#[derive(Parser)]
#[command(name = "lorenz-shadow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model axioms and numerical properties; writes model_report.txt.
    ModelCheck(Common),
    /// Build the pseudo-orbit and certify its gaps; writes gaps.csv and orbit.csv.
    BuildPseudo(Common),
    /// Search for shadowing candidates and check the floor; writes the search CSVs and summary.txt.
    Falsify(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of optimizer multi-starts.
    #[arg(long, value_name = "N")]
    budget: Option<usize>,
    /// Hypothesis case; replaces `case` from the config.
    #[arg(long, value_parser = parse_case)]
    case: Option<Case>,
}

fn parse_case(s: &str) -> Result<Case, String> {
    s.parse().map_err(|e: lorenz_shadow::Error| e.to_string())
}

fn load(c: &Common) -> Result<ExperimentConfig, CliError> {
    let text = match &c.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let overrides = Overrides {
        seed: c.seed,
        budget: c.budget,
        case: c.case,
        out: c.out.clone(),
    };
    ExperimentConfig::parse(&text, &overrides)
}

fn run(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::ModelCheck(c) => run_model_check(&load(c)?),
        Command::BuildPseudo(c) => run_build_pseudo(&load(c)?),
        Command::Falsify(c) => run_falsify(&load(c)?).map(|r| r.outcome),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
