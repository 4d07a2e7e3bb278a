//! `tracecbr` command-line front end.
//!
//! Exit status: 0 success, 1 I/O or parse failure, 2 validation failure
//! (unknown concept, dimension mismatch, invalid flag, duplicate id).

mod args;
mod commands;

use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use tracecbr_core::{Error, ErrorClass};

use args::{Cli, Command, ScenarioCommand};

fn run(cli: Cli) -> Result<(), Error> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Compare(args) => commands::compare(&args, &mut out)?,
        Command::Watch(args) => match (&args.events, args.follow) {
            (Some(path), false) => {
                let file = std::fs::File::open(path).map_err(|e| Error::Io {
                    path: Some(path.clone()),
                    source: e,
                })?;
                commands::watch(&args, BufReader::new(file), &mut out)?
            }
            _ => commands::watch(&args, io::stdin().lock(), &mut out)?,
        },
        Command::Scenario(ScenarioCommand::Add(args)) => commands::scenario_add(&args, &mut out)?,
        Command::Scenario(ScenarioCommand::List(args)) => commands::scenario_list(&args, &mut out)?,
    }
    out.flush().map_err(|e| Error::Io {
        path: None,
        source: e,
    })
}

fn is_broken_pipe(e: &Error) -> bool {
    matches!(e.root(), Error::Io { source, .. } if source.kind() == io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tracecbr: {e}");
            match e.class() {
                ErrorClass::Input => ExitCode::from(1),
                ErrorClass::Validation => ExitCode::from(2),
            }
        }
    }
}
