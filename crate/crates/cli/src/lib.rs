//! Command-line front end: argument parsing, experiment dispatch, result
//! files and plot data.

pub mod manifest;
pub mod output;
pub mod plots;
pub mod run;

use std::path::PathBuf;

pub use manifest::{parse_cli, RunManifest};
pub use run::execute;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] spinsim_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 for `--help`/`--version`, 2 usage, 3 I/O, 4 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => 0,
            CliError::Clap(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Invariant(_) => 4,
            CliError::Core(
                spinsim_core::Error::InvalidConfig(_) | spinsim_core::Error::UnphysicalState { .. },
            ) => 2,
            CliError::Core(spinsim_core::Error::EmptyTable) => 4,
        }
    }
}
