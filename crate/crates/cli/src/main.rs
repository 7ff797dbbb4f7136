use std::process::ExitCode;

use clap::Parser;

mod cli;
mod commands;
mod figures;

use cli::{Cli, Command};

/// 0 success, 2 usage or configuration error, 3 numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<secbeam::Error>() {
            return match e {
                secbeam::Error::Numerical { .. } | secbeam::Error::NonFinite(_) | secbeam::Error::LogDomain(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

/// `THREADS` caps the worker pool used for Monte Carlo fan-out.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| secbeam::Error::config("THREADS", format!("expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Compare(a) => commands::compare(a),
        Command::Plot(a) => commands::plot(a),
        Command::Latency(a) => commands::latency(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
