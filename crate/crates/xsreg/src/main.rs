use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = xsreg::cli::Cli::parse();
    match xsreg::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
