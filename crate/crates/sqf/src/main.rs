use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sqf::cli::Cli::parse();
    match sqf::cli::dispatch(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
