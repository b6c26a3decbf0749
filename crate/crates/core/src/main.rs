use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use statelock::cli::{run, Cli};

fn report(message: &str, kind: &str) {
    eprintln!("{}", serde_json::json!({ "error": message, "kind": kind }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            report(e.to_string().trim_end(), "usage");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e.to_string(), e.kind());
            ExitCode::FAILURE
        }
    }
}
