use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod commands;
mod error;
mod manifest;

use args::{Cli, Command, ReplayArgs};
use error::CliError;
use manifest::RunManifest;

fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let manifest = RunManifest::read(&args.manifest)?;
    if manifest.tool_version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest written by version {}, replaying with {}",
            manifest.tool_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    manifest.verify_inputs()?;
    let mut command = manifest.command;
    match &mut command {
        Command::Evaluate(a) => a.out = args.out.clone(),
        Command::Decompose(a) => a.out = args.out.clone(),
        Command::GenSynth(a) => {
            if let Some(out) = &args.out {
                a.out = out.clone();
            }
        }
        Command::Replay(_) => return Err(CliError::Replay("manifest records a replay".into())),
    }
    commands::run(&command)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Replay(args) => replay(args),
        other => commands::run(other),
    })
}

/// Machine-readable error on stdout; a closed pipe is not worth a panic.
fn report(err: &CliError) {
    let _ = writeln!(std::io::stdout().lock(), "{}", err.to_json());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            report(&err);
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
