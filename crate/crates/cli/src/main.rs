mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Eval(a) => commands::eval(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Screen(a) => commands::screen_cmd(a),
        Command::Shrink(a) => commands::shrink(a),
        Command::Cohort(a) => commands::cohort(a),
    }
}

/// Numerical failures exit with 3; everything else is an input problem.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<hibscreen::Error>()) {
        Some(e) if e.is_numerical() => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", cli.workers);
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
