use std::process::ExitCode;

use adbench_cli::{run, Cli, Status};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(s) => ExitCode::from(s as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Abort as u8)
        }
    }
}
