//! Command-line front end for robust complex M-Lasso fits and the
//! single-snapshot DoA experiment.
//!
//! Every command writes `manifest.json` next to its outputs; `replay`
//! re-runs it. Exit codes: 0 ok, 1 I/O, 2 parse, 3 solver, 4 KKT failure,
//! 5 invalid arguments.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, ReplayArgs};
use error::{CliError, CliResult, EXIT_INVALID, EXIT_OK};
use manifest::RunManifest;

pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Path(a) => commands::path(&a),
        Command::DoaRepro(a) => commands::doa_repro(&a),
        Command::Montecarlo(a) => commands::montecarlo(&a),
        Command::Replay(a) => replay(&a),
    }
}

fn replay(args: &ReplayArgs) -> CliResult<i32> {
    let manifest = RunManifest::read(&args.manifest)?;
    manifest.check_inputs()?;
    let out = args.out.clone().unwrap_or_else(|| manifest.out.clone());
    let mut argv: Vec<OsString> = vec!["robust-classo".into()];
    argv.extend(manifest.args.iter().map(OsString::from));
    argv.extend(["--out".into(), out.into_os_string()]);
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Parse {
        path: args.manifest.clone(),
        message: e.to_string(),
    })?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::InvalidArgs(
            "a manifest cannot replay another replay".into(),
        ));
    }
    run(cli)
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Errors are reported on stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
