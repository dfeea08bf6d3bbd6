mod config;
mod model;
mod run;

use std::process::ExitCode;

use clap::Parser;

use crate::config::{Cli, RunConfig};

fn main() -> ExitCode {
    // usage errors exit 1: code 2 is reserved for undecided verdicts
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = RunConfig::from_cli(&cli).and_then(|config| run::run(&config));
    match result {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
