mod cli;
mod commands;
mod error;
mod files;

use std::process;

use clap::error::ErrorKind as ClapErrorKind;
use clap::Parser;

use crate::error::CliError;

fn fail(e: &CliError, json: bool) -> ! {
    if json {
        eprintln!("{}", e.to_json());
    } else {
        eprintln!("apmob: {e}");
    }
    process::exit(e.exit_code());
}

fn main() {
    let args = match cli::Cli::try_parse() {
        Ok(args) => args,
        Err(e) if matches!(e.kind(), ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            if std::env::args().any(|a| a == "--json-errors") {
                fail(&CliError::usage(e.kind().to_string()), true);
            }
            let _ = e.print();
            process::exit(1);
        }
    };
    if let Err(e) = commands::run(args.command) {
        fail(&e, args.json_errors);
    }
}
