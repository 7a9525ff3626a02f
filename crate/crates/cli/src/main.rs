mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use resforge::forcespace::ResidualMode;

use commands::{Failure, EXIT_NOT_CONVERGED};

#[derive(Debug, Parser)]
#[command(
    name = "resforge",
    version,
    about = "Residual force polytopes and robust trajectory optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    SymmetricShrink,
    ExactTranslate,
}

impl From<Mode> for ResidualMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::SymmetricShrink => ResidualMode::SymmetricShrink,
            Mode::ExactTranslate => ResidualMode::ExactTranslate,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a scenario; writes solution.json, trace.csv and trajectory.svg.
    Optimize {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write force and residual polytopes at every mesh point.
        #[arg(long)]
        dump_polytopes: bool,
        /// Overrides the scenario's solver seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Residual-ball radius over time for one or more solutions, optionally
    /// with an impulse torque test.
    Evaluate {
        /// Model file or built-in name.
        model: PathBuf,
        #[arg(required = true, num_args = 1..)]
        trajectories: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        impulse: bool,
        /// Impulse direction, e.g. `0,1`; normalized before use.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "impulse")]
        direction: Option<Vec<f64>>,
        /// Peak force of the impulse (N).
        #[arg(long, default_value_t = 350.0, requires = "impulse")]
        f_peak: f64,
        #[arg(long, value_enum, default_value_t = Mode::SymmetricShrink)]
        residual_mode: Mode,
    },
    /// Time the geometry kernel and one evaluation of each objective.
    Bench {
        /// Model file or built-in name.
        model: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Optimize {
            scenario,
            output,
            dump_polytopes,
            seed,
        } => commands::optimize(&scenario, &output, dump_polytopes, seed),
        Command::Evaluate {
            model,
            trajectories,
            output,
            impulse,
            direction,
            f_peak,
            residual_mode,
        } => {
            let impulse = if impulse {
                let Some(d) = direction else {
                    return Err(Failure::input("--impulse needs --direction"));
                };
                Some((d, f_peak))
            } else {
                None
            };
            commands::evaluate(&model, &trajectories, &output, impulse, residual_mode.into()).map(|_| true)
        }
        Command::Bench {
            model,
            samples,
            seed,
            output,
        } => commands::bench(&model, samples as usize, seed, &output).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("solver did not converge; artifacts written");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
