use std::path::PathBuf;

use thiserror::Error;

use crate::maze::{ActionDir, GridPos};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("position {pos} is outside the {width}x{height} maze")]
    OutOfBounds {
        pos: GridPos,
        width: usize,
        height: usize,
    },

    #[error("cannot step from terminal state {0}")]
    StepFromTerminal(GridPos),

    #[error("goal is unreachable from start")]
    UnreachableGoal,

    #[error("maze parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("model already records a different outcome for {action:?} at {state}")]
    ModelInconsistency { state: GridPos, action: ActionDir },

    #[error("dead end at {0} with an empty action trail")]
    DeadEnd(GridPos),

    #[error("every known state-action pair has been explored")]
    ExplorationComplete,

    #[error("no explored path from {from} to {to}")]
    NoPath { from: GridPos, to: GridPos },

    #[error("no terminal state has been recorded yet")]
    NotReady,

    #[error("malformed csv {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
