//! Command-line front end: cohort manifests, LP solutions, toy training runs
//! and subgroup fairness reports.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use config::{load_config, parse_config, RunConfig};
pub use error::CliError;

use args::{Cli, Command};
use commands::Context;

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context { quiet: cli.quiet };
    match &cli.command {
        Command::Build(a) => commands::build(&ctx, a),
        Command::Solve(a) => {
            emit(&format!("{}\n", commands::solve(a)?));
            Ok(())
        }
        Command::TrainToy(a) => commands::train_toy(&ctx, a),
        Command::Eval(a) => commands::evaluate(&ctx, a),
        Command::ReproduceTable1(a) => {
            let (table, ok) = commands::reproduce_table1(a)?;
            emit(&table);
            if ok {
                Ok(())
            } else {
                Err(CliError::Data("rounded counts differ from the reference table".into()))
            }
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => error::EXIT_USAGE,
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            // Messages already embed their causes.
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
