//! Error types shared across the crate.

use crate::homotopy::SolveReport;

/// Errors produced by problem ingestion, formula preconditions and solvers.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// A file could not be parsed; carries the offending line number.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Two objects that must agree in size do not.
    #[error("dimension mismatch for {object}: expected {expected}, found {found}")]
    Dimension {
        object: &'static str,
        expected: usize,
        found: usize,
    },

    /// A scalar argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A formula was invoked outside its hypotheses.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An inner solver failed to reach its target accuracy.
    #[error("inner solver did not converge{}: {msg}", phase.map(|k| format!(" in phase {k}")).unwrap_or_default())]
    NonConvergence { phase: Option<usize>, msg: String },

    /// The phase cap was hit before the termination radius; the partial
    /// report is preserved for inspection.
    #[error("homotopy exceeded the phase cap of {max_phases}")]
    MaxPhases {
        max_phases: usize,
        report: Box<SolveReport>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
