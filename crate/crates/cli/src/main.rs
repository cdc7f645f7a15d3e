use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use virodyn_cli::{run, Command};

/// Heterogeneous virus-dynamics solvers driven by flat scenario files.
#[derive(Parser, Debug)]
#[command(name = "virodyn", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file of `key = value` lines.
    scenario: PathBuf,
    /// Directory for CSV outputs; created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(2);
        }
    };
    match run(args.command, &args.scenario, &args.out) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("virodyn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
