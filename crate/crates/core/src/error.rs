//! Crate-wide error type. Variants map onto the CLI exit codes, so every
//! failure mode stays distinguishable from the outside.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input: config files, CSV, masks, parameters.
    /// The message names the offending file, key or value.
    #[error("parse: {0}")]
    Parse(String),

    /// The search could not produce a path (blocked start/goal, no route).
    #[error("planning: {0}")]
    Planning(String),

    /// The NLP solver failed numerically or left constraints violated.
    #[error("solver: {0}")]
    Solver(String),

    /// A trajectory intersects an obstacle or leaves the mapped area.
    #[error("collision: {0}")]
    Collision(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI. 0 is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) => 2,
            Error::Planning(_) => 3,
            Error::Solver(_) => 4,
            Error::Collision(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
