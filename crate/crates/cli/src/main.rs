use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stein_drift_cli::{commands, CliError, Settings};

#[derive(Debug, Parser)]
#[command(name = "stein-drift", version, about = "Stein-type drift estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one seeded path and its drift estimate.
    Simulate(Settings),
    /// Gain of the Stein estimator against n.
    GainCurve(Settings),
    /// Gain over n and a sweep of T or sigma.
    Surface(Settings),
    /// Empirical risk of one estimator.
    Risk(Settings),
    /// The four-dimensional Gaussian constant.
    Constant(Settings),
    /// Bayes risk under a Brownian prior.
    Bayes(Settings),
    /// Run the acceptance checks.
    Verify(Settings),
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(s) => report(commands::simulate(&s.resolve()?)?),
        Command::GainCurve(s) => {
            let (n_opt, files) = commands::gain_curve_cmd(&s.resolve()?)?;
            println!("n_opt = {n_opt}");
            report(files)
        }
        Command::Surface(s) => report(commands::surface(&s.resolve()?)?),
        Command::Risk(s) => report(commands::risk_cmd(&s.resolve()?)?),
        Command::Constant(s) => report(commands::constant_cmd(&s.resolve()?)?),
        Command::Bayes(s) => report(commands::bayes_cmd(&s.resolve()?)?),
        Command::Verify(s) => report(commands::verify(&s.resolve()?)?),
    }
}

fn report(files: Vec<std::path::PathBuf>) -> Result<(), CliError> {
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stein-drift: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
