//! Command-line front end for `flexhose`: TOML scenario configs, the
//! `simulate`, `plan`, `linearize`, `lqr-synth` and `benchmark` commands,
//! and their CSV and JSON outputs.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config or scenario,
//! 3 divergence, 4 numerical failure inside the library.

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] flexhose::Error),

    #[error("{0}")]
    Io(String),

    #[error("simulation diverged at t = {t}")]
    Diverged { t: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use flexhose::Error as E;
        match self {
            CliError::Config { .. } => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Diverged { .. } => EXIT_DIVERGED,
            CliError::Core(e) => match e {
                E::InvalidParams(_)
                | E::InvalidState(_)
                | E::DegenerateTension(_)
                | E::FlatnessSingularity { .. }
                | E::AttitudeSingularity(_)
                | E::Unreachable(_)
                | E::OutOfRadius(_)
                | E::InvalidScenario(_)
                | E::GainFile(_)
                | E::OrderMismatch { .. } => EXIT_VALIDATION,
                E::Degenerate { .. }
                | E::NotAntisymmetric(_)
                | E::SingularMassMatrix { .. }
                | E::InconsistentTensions(_)
                | E::NoConvergence { .. }
                | E::RiccatiBlowUp { .. } => EXIT_NUMERIC,
            },
        }
    }
}
