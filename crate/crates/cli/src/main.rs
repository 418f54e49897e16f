use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(gpart_cli::run(gpart_cli::Cli::parse()))
}
