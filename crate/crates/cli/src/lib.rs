//! `qvdp` command-line front-end. Every subcommand writes CSV or JSON
//! artifacts carrying a provenance header; see `qvdp --help` for exit codes.

pub mod args;
mod commands;
mod config;
mod output;
mod pipeline;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use output::Artifact;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_REGIME: i32 = 4;
pub const EXIT_STATISTICS: i32 = 5;
pub const EXIT_IO: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qvdp_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qvdp_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                E::InvalidParams(_)
                | E::InvalidDimension(_)
                | E::MissingDriveFrequency
                | E::Resolution { .. }
                | E::TooLarge { .. }
                | E::TruncationOverflow { .. }
                | E::Bracket { .. } => EXIT_USAGE,
                E::WrongRegime(_) => EXIT_REGIME,
                E::InsufficientStatistics(_) => EXIT_STATISTICS,
                E::Io(_) => EXIT_IO,
                _ => EXIT_NUMERIC,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Written files are listed on stdout.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::merge(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("qvdp: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("qvdp: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns the paths written.
pub fn execute(cli: &Cli) -> CliResult<Vec<std::path::PathBuf>> {
    let out = output::Output::new(&cli.common.out, cli.common.format)?;
    let artifacts = match &cli.command {
        args::Command::Fig(f) => return pipeline::figure(f.n, &cli.common, &out),
        cmd => commands::dispatch(cmd, &cli.common)?,
    };
    out.write_all(&artifacts)
}
