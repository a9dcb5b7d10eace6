use std::process::ExitCode;

use clap::Parser;
use coordprop_cli::app::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(coordprop_cli::app::exit_code(&e))
        }
    }
}
