//! Library side of the `gpart` command-line tool.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use gpart_core::adapters::GPartMode;
use gpart_core::verify::Hooks;
use gpart_core::Error;

pub use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_FORMAT: u8 = 4;

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::Format { .. } => EXIT_FORMAT,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gpart",
    version,
    about = "Partition-projected fine-tuning laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Drop the 1/sqrt(n) scale from the projection.
    UnscaledProject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Iso,
    Noniso,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the property suite; exit 0 iff every selected property holds.
    Verify {
        /// Only run properties whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<Fault>,
    },
    /// Pretrain, fine-tune one adapter, write record, checkpoint and resolved config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the 2-D loss surface around a trained checkpoint.
    Landscape {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output CSV (default: <output_dir>/landscape.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate grid cells in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Fine-tune GPart at several d and aggregate dev accuracy.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list of d values.
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<usize>,
        /// Output CSV (default: <output_dir>/sweep.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a checkpoint from a theta CSV and partition parameters.
    Pack {
        #[arg(long)]
        theta: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        total: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value = "iso")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a checkpoint's header and write its theta as CSV.
    Unpack {
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Verify {
            filter,
            inject_fault,
        } => {
            let hooks = match inject_fault {
                Some(Fault::UnscaledProject) => Hooks::unscaled_project(),
                None => Hooks::default(),
            };
            let outcomes = commands::verify(filter.as_deref(), &hooks);
            return if outcomes.is_empty() {
                eprintln!("error: no property matches the filter");
                EXIT_CONFIG
            } else if outcomes.iter().all(|o| o.passed) {
                EXIT_OK
            } else {
                EXIT_VERIFY_FAILED
            };
        }
        Command::Train { config } => commands::train(&config).map(drop),
        Command::Landscape {
            config,
            checkpoint,
            out,
            parallel,
        } => commands::landscape(&config, &checkpoint, out.as_deref(), parallel).map(drop),
        Command::Sweep { config, d, out } => commands::sweep(&config, &d, out.as_deref()).map(drop),
        Command::Pack {
            theta,
            seed,
            total,
            dim,
            mode,
            out,
        } => {
            let mode = match mode {
                ModeArg::Iso => GPartMode::Isometric,
                ModeArg::Noniso => GPartMode::NonIsometric,
            };
            commands::pack(&theta, seed, total, dim, mode, &out)
        }
        Command::Unpack { checkpoint, out } => commands::unpack(&checkpoint, &out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
