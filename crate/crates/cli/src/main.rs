mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use sysid_core::SysidError;

use args::{Cli, Command};
use commands::{default_manifest_path, execute, replay, Run};

fn exit_for(e: &SysidError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_io() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start thread pool: {e}");
        return ExitCode::from(1);
    }

    if let Command::Replay(a) = &cli.command {
        return match replay(a) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => {
                eprintln!("error: replayed outputs differ from the manifest");
                ExitCode::from(1)
            }
            Err(e) => exit_for(&e),
        };
    }

    let mut run = Run::new(cli.seed, cli.threads);
    let manifest = match execute(&cli.command, &mut run) {
        Ok(m) => m,
        Err(e) => return exit_for(&e),
    };
    if let Some(path) = cli.manifest.or_else(|| default_manifest_path(&cli.command)) {
        if let Err(e) = manifest.save(&path) {
            return exit_for(&e);
        }
    }
    ExitCode::SUCCESS
}
