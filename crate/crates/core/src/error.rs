use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("root {0} does not occur in the edge list")]
    MissingRoot(String),

    #[error("hypernym cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("unknown concept id `{0}`")]
    UnknownConcept(String),

    #[error("{count} catalog entries do not resolve against the taxonomy; first offenders: {}", .first.join(", "))]
    Unresolved { count: usize, first: Vec<String> },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("invalid scene graph: {0}")]
    InvalidGraph(String),

    #[error("complexity must be at least 1 (got {0})")]
    ComplexityTooSmall(usize),

    #[error("enumeration at complexity {complexity} exceeds the ceiling of {ceiling} structures")]
    Overflow { complexity: usize, ceiling: usize },

    #[error("complexity {0} not enumerated")]
    NotEnumerated(usize),

    #[error("no structures match the query at complexity {0}")]
    NoStructures(usize),

    #[error("scope too narrow: {category} needs {needed} distinct entries, view has {available}")]
    ScopeTooNarrow {
        category: String,
        needed: usize,
        available: usize,
    },

    #[error("invalid range [{lo}, {hi}]: {reason}")]
    InvalidRange { lo: usize, hi: usize, reason: String },

    #[error("no realization template for scene attribute `{0}`")]
    MissingTemplate(String),

    #[error("record {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("duplicate score key ({0}, {1}, {2})")]
    DuplicateScore(String, String, String),

    #[error("no scores for model `{model}` metric `{metric}`")]
    NoScores { model: String, metric: String },

    #[error("property `{property}` missing on record {caption_id}")]
    MissingProperty { property: String, caption_id: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn at_index(self, index: usize) -> Self {
        Error::AtIndex {
            index,
            source: Box::new(self),
        }
    }

    /// True when the error signals a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Invariant(_) => true,
            Error::AtIndex { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}
