mod cli;

use std::process::ExitCode;

use clap::Parser;
use midas_ll1::MidasError;

const EXIT_ERROR: u8 = 1;
const EXIT_DIVERGED: u8 = 3;

/// Sizes the global rayon pool from `MIDAS_THREADS` when set.
fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("MIDAS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MIDAS_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = cli::Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_ERROR);
    }
    match cli::dispatch(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ MidasError::Diverged { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
