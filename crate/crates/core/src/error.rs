use thiserror::Error;

use crate::bench::BenchError;
use crate::laser::LaserError;
use crate::lock::LockError;
use crate::opo::OpoError;
use crate::optics::OpticsError;
use crate::spectrum::SpectrumError;
use crate::sweep::SweepError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error. Each variant maps onto one process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("in `{section}`: {source}")]
    Section {
        section: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Optics(#[from] OpticsError),

    #[error(transparent)]
    Laser(#[from] LaserError),

    #[error(transparent)]
    Opo(#[from] OpoError),

    #[error(transparent)]
    Lock(#[from] LockError),

    #[error(transparent)]
    Bench(#[from] BenchError),

    #[error(transparent)]
    Spectrum(#[from] SpectrumError),

    #[error(transparent)]
    Sweep(#[from] SweepError),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn in_section(section: impl Into<String>, source: impl Into<Error>) -> Self {
        Error::Section {
            section: section.into(),
            source: Box::new(source.into()),
        }
    }

    /// Process exit code: 2 config, 3 physics/validation, 4 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io { .. } => 2,
            Error::Section { source, .. } => source.exit_code(),
            Error::Laser(LaserError::MissingNonlinearParameters) => 2,
            Error::Optics(_) | Error::Laser(_) | Error::Opo(_) | Error::Lock(_) => 3,
            Error::Bench(BenchError::Saturation { .. }) => 3,
            Error::Bench(_) | Error::Spectrum(_) => 4,
            Error::Sweep(SweepError::InvalidRange { .. }) => 2,
            Error::Sweep(SweepError::Parameter { .. }) => 2,
            Error::Sweep(SweepError::Objective(inner)) => inner.exit_code(),
        }
    }
}
