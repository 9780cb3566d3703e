use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = qvar::cli::Cli::parse();
    match qvar::cli::execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qvar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
