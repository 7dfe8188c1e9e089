mod args;
mod commands;
mod config;
mod seeds;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(config::exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = cli.config.as_deref().map(config::load_file).transpose()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config::bad("--threads must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| commands::run(cli.command, file.as_ref()))
}
