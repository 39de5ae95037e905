use std::process::ExitCode;

use clap::Parser;
use diffexplain_cli::{run, Cli, Outcome};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stage = cli.command.stage().name();
    match run(&cli) {
        Ok(Outcome::Ran { artifacts }) => {
            println!("{stage}: wrote {} artifacts", artifacts.len());
            ExitCode::SUCCESS
        }
        Ok(Outcome::Skipped) => {
            println!("{stage}: up to date (use --force to rerun)");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
