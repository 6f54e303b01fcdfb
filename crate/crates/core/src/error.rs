use std::fmt;
use std::path::PathBuf;

use crate::data::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure is attributed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Preprocess,
    Manifold,
    Training,
    Prototypes,
    Projection,
    Evaluation,
    Checkpoint,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Manifold => "manifold",
            Stage::Training => "training",
            Stage::Prototypes => "prototypes",
            Stage::Projection => "projection",
            Stage::Evaluation => "evaluation",
            Stage::Checkpoint => "checkpoint",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

/// Broad failure class, used to pick a process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Ingestion,
    Numerical,
    Parameter,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Ingestion => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Parameter => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigendecomposition of a {size}x{size} matrix did not converge after {sweeps} sweeps")]
    NoConvergence { size: usize, sweeps: usize },

    #[error("degenerate (zero-norm) vector in {0}")]
    DegenerateVector(&'static str),

    #[error("singular system in {context}; {hint}")]
    Singular {
        context: &'static str,
        hint: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Diverged { epoch: usize, learning_rate: f64 },

    #[error("class {0} has no examples")]
    MissingClass(ClassId),

    #[error("label {0} is not in the class table")]
    UnknownLabel(ClassId),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn dimension(context: &'static str, expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn parameter(message: impl Into<String>) -> Self {
        Error::Parameter(message.into())
    }

    pub fn ingestion(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a stage name. An already-staged error keeps its original stage.
    pub fn at(self, stage: Stage) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            Error::Ingestion { .. } | Error::Io { .. } | Error::MissingClass(_) | Error::UnknownLabel(_) => {
                ErrorKind::Ingestion
            }
            Error::NotSymmetric { .. }
            | Error::NoConvergence { .. }
            | Error::DegenerateVector(_)
            | Error::Singular { .. }
            | Error::NonFinite(_)
            | Error::Diverged { .. } => ErrorKind::Numerical,
            Error::Dimension { .. } | Error::Parameter(_) => ErrorKind::Parameter,
            Error::Stage { .. } => unreachable!("root() strips stage wrappers"),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}

/// Extension for tagging fallible results with a stage.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
