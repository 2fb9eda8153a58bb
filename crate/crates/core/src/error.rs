use thiserror::Error;

use crate::assembly::AssemblyError;
use crate::config::ConfigError;
use crate::mesh::MeshError;
use crate::partition::PartitionError;
use crate::signals::SignalError;
use crate::solver::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline error tagged with the stage that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("assembly: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("signals: {0}")]
    Signal(#[from] SignalError),
    #[error("io: {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Mesh(_) | Error::Partition(_) => 3,
            Error::Assembly(_) | Error::Solver(_) | Error::Signal(_) => 4,
            Error::Io { .. } => 5,
            Error::Other(_) => 1,
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Mesh(_) => "mesh",
            Error::Partition(_) => "partition",
            Error::Assembly(_) => "assembly",
            Error::Solver(_) => "solver",
            Error::Signal(_) => "signals",
            Error::Io { .. } => "io",
            Error::Other(_) => "run",
        }
    }
}
