use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use saddlescout::check::Fixture;
use saddlescout::commands::{self, print, Format};
use saddlescout::HarnessError;

#[derive(Parser)]
#[command(name = "saddlescout", version, about = "Heavy-ball SGD saddle-escape experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trajectory.csv and summary.txt
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every (beta, seed) cell and write sweep_summary.csv
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate the parameter recipe and its constraint report
    Plan {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Run the self-verification suite
    Check {
        #[arg(long, hide = true, default_value = "none")]
        fixture: Fixture,
    },
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, out } => {
            let summary = commands::cmd_run(&config, &out)?;
            print(&summary);
        }
        Command::Sweep { config, out, jobs } => {
            let summary = commands::cmd_sweep(&config, &out, jobs)?;
            print(&summary);
        }
        Command::Plan { config, format } => {
            let format = match format {
                OutputFormat::Text => Format::Text,
                OutputFormat::Csv => Format::Csv,
            };
            match commands::cmd_plan(&config, format) {
                Ok(report) => print(&report),
                Err(HarnessError::Infeasible { constraint, report }) => {
                    print(&report);
                    return Err(HarnessError::Infeasible { constraint, report: String::new() });
                }
                Err(e) => return Err(e),
            }
        }
        Command::Check { fixture } => {
            let (outcomes, ok) = commands::cmd_check(fixture);
            for o in &outcomes {
                println!("{o}");
            }
            if !ok {
                return Err(HarnessError::CheckFailed(outcomes.iter().filter(|o| !o.pass).count()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
