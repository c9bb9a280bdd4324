use std::process::ExitCode;

use clap::Parser;
use fso_sim::{execute, Cli};

fn main() -> ExitCode {
    // clap exits with status 2 on malformed flags
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fso-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
