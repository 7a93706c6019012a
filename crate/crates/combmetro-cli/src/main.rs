use clap::{Parser, Subcommand};
use combmetro_cli::{run_task, sweep, validate, CliError, ExperimentConfig, Overrides, Report};
use std::path::PathBuf;
use std::process::ExitCode;

/// Task QFI of parametrized quantum processes under definite and indefinite causal order.
#[derive(Parser)]
#[command(name = "combmetro", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output path; stdout when absent and the config names none.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Largest accepted relative gap between oracle QFI and solver value.
    #[arg(long = "tol-gap", global = true)]
    tol_gap: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every strategy set of the config once.
    Run { config: PathBuf },
    /// Evaluate the config's sweep grid and write CSV.
    Sweep { config: PathBuf },
    /// Check a strategy document against the config's process.
    Validate { strategy: PathBuf, config: PathBuf },
}

fn dispatch(cli: Cli) -> Result<Report, CliError> {
    let ov = Overrides { out: cli.out, jobs: cli.jobs, tol_gap: cli.tol_gap };
    match cli.command {
        Command::Run { config } => run_task(ExperimentConfig::load(&config)?, &ov),
        Command::Sweep { config } => sweep(ExperimentConfig::load(&config)?, &ov),
        Command::Validate { strategy, config } => validate(&strategy, ExperimentConfig::load(&config)?, &ov),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    combmetro::linalg::use_sequential_kernels();
    match dispatch(cli) {
        Ok(report) => {
            if report.path.is_none() {
                print!("{}", report.text);
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: at least one strategy set failed; see the output for details");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
