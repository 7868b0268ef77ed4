use std::process::ExitCode;

use clap::Parser;
use gear_tda_cli::config::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match gear_tda_cli::run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
