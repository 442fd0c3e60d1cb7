use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SysidError>;

#[derive(Debug, Error)]
pub enum SysidError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state became non-finite or exceeded 1e12 at step {step}")]
    NonFiniteState { step: usize },

    #[error("objective diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("eigenvalue iteration did not converge for a {n}x{n} matrix")]
    EigenNoConvergence { n: usize },

    #[error("epsilon-net of {requested} points exceeds the budget of {budget}; use farkas_feasible instead")]
    NetBudget { requested: u64, budget: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("at T={horizon}, trial {trial}: {source}")]
    Pipeline {
        horizon: usize,
        trial: usize,
        #[source]
        source: Box<SysidError>,
    },
}

impl SysidError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SysidError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl std::fmt::Display) -> Self {
        SysidError::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// True when the root cause is a filesystem failure.
    pub fn is_io(&self) -> bool {
        match self {
            SysidError::Io { .. } => true,
            SysidError::Pipeline { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
