use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One offending line of an ingested CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct RowProblem {
    /// 1-based line number in the source, header included.
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for RowProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

fn join_problems(problems: &[RowProblem]) -> String {
    problems
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Geometry or frequency outside the range a model covers.
    #[error("range error: {0}")]
    Range(String),

    /// Rejected rows of an ingested table.
    #[error("ingestion failed: {}", join_problems(.problems))]
    Ingest { problems: Vec<RowProblem> },

    /// No candidate satisfies the magnitude constraint, or the phase span is
    /// too small for the requested operation.
    #[error("coverage error: {message} (achievable span {span_deg:.1} deg)")]
    Coverage { message: String, span_deg: f64 },

    /// Invalid layout, geometry or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("malformed file: {0}")]
    Malformed(String),

    /// The angular grid is too coarse to resolve the main beam.
    #[error("main beam not resolved: {0}")]
    Unresolved(String),

    /// Mesh assembly or export refused.
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("i/o error on {path}: {source}")]
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

    /// Short stable identifier, used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Range(_) => "range",
            Error::Ingest { .. } => "ingest",
            Error::Coverage { .. } => "coverage",
            Error::Config(_) => "config",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Malformed(_) => "malformed",
            Error::Unresolved(_) => "unresolved",
            Error::Mesh(_) => "mesh",
            Error::Io { .. } => "io",
        }
    }
}
