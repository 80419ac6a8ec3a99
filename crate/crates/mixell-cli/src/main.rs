//! Command line driver. Subcommands map one-to-one onto the experiment
//! commands; every run ends by writing `manifest.txt` next to its data
//! files. Exit codes: 0 all recorded invariants pass, 1 configuration
//! error, 2 at least one invariant failed, 3 a solver gave up.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdError;
use config::ExperimentConfig;
use output::ManifestBuilder;

#[derive(Parser)]
#[command(name = "mixell", version, about = "mixed local-nonlocal operator laboratory")]
struct Cli {
    /// Experiment configuration file (flat key = value lines); defaults
    /// to the built-in reference setup when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding output.dir from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Added to every seed; distinct offsets give independent replicas.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    seed_offset: u64,
    /// Suppress the manifest echo on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Assemble the operators, dump them, and summarize the spectrum.
    Assemble,
    /// Run the regularization schedule for the singular problem.
    Singular,
    /// Extract the sharp constant both ways and compare.
    Sobolev,
    /// Solve both manifold branches over the lambda sweep.
    Nehari,
    /// Run every invariant suite and emit the full manifest.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Assemble => "assemble",
            Command::Singular => "singular",
            Command::Sobolev => "sobolev",
            Command::Nehari => "nehari",
            Command::Verify => "verify",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    ExitCode::from(run(cli))
}

fn run(cli: Cli) -> u8 {
    let text = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return 1;
            }
        },
        None => String::new(),
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    cfg.apply_seed_offset(cli.seed_offset);
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }

    let mut mb = ManifestBuilder::new(
        cli.command.name(),
        &cfg.canonical(),
        cli.seed_offset,
        &cfg.output_dir,
    );
    let result = match cli.command {
        Command::Assemble => commands::cmd_assemble(&cfg, &mut mb),
        Command::Singular => commands::cmd_singular(&cfg, &mut mb),
        Command::Sobolev => commands::cmd_sobolev(&cfg, &mut mb),
        Command::Nehari => commands::cmd_nehari(&cfg, &mut mb),
        Command::Verify => commands::cmd_verify(&cfg, &mut mb),
    };
    match result {
        Ok(()) => {}
        Err(CmdError::Config(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
        Err(CmdError::Solver(msg)) => {
            eprintln!("error: {msg}");
            return 3;
        }
    }
    if let Err(msg) = mb.close_coverage() {
        eprintln!("error: {msg}");
        return 3;
    }
    let manifest = match mb.write_all() {
        Ok(manifest) => manifest,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    if !cli.quiet {
        print!("{manifest}");
    }
    if mb.any_failed() {
        2
    } else {
        0
    }
}
