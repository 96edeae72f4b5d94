use std::path::PathBuf;

use thiserror::Error;

use crate::sql::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage that produced a failure in the tabular workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SelectTables,
    ComposePrompt,
    GenerateSql,
    ExecuteSql,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::SelectTables => "select_tables",
            Stage::ComposePrompt => "compose_prompt",
            Stage::GenerateSql => "generate_sql",
            Stage::ExecuteSql => "execute_sql",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot embed empty or whitespace-only text")]
    EmptyText,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("batch element {index}: {source}")]
    BatchElement {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store at line {line}: {reason}")]
    CorruptStore { line: usize, reason: String },
    #[error("prompt has no context section")]
    MalformedPrompt,
    #[error("no context chunks to compose a prompt from")]
    EmptyContext,
    #[error("store was built by {store:?} but the configured embedder is {embedder:?}")]
    FingerprintMismatch { store: String, embedder: String },
    #[error("cannot read database {path}: {reason}")]
    DbUnreadable { path: PathBuf, reason: String },
    #[error("no tables selected")]
    EmptySelection,
    #[error("model produced no SQL")]
    EmptyGeneration,
    #[error("sql error: {0}")]
    SqlError(String),
    #[error("refusing to run a statement that is not a read query: {0}")]
    NonReadStatement(String),
    #[error("query exceeded {0} ms")]
    Timeout(u64),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation error: {0}")]
    EvalError(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short variant name, used as a machine-readable error kind in traces and reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidInput(_) => "InvalidInput",
            Error::EmptyText => "EmptyText",
            Error::BackendUnavailable(_) => "BackendUnavailable",
            Error::BatchElement { source, .. } => source.kind(),
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroVector => "ZeroVector",
            Error::DuplicateId(_) => "DuplicateId",
            Error::Io { .. } => "Io",
            Error::CorruptStore { .. } => "CorruptStore",
            Error::MalformedPrompt => "MalformedPrompt",
            Error::EmptyContext => "EmptyContext",
            Error::FingerprintMismatch { .. } => "FingerprintMismatch",
            Error::DbUnreadable { .. } => "DbUnreadable",
            Error::EmptySelection => "EmptySelection",
            Error::EmptyGeneration => "EmptyGeneration",
            Error::SqlError(_) => "SqlError",
            Error::NonReadStatement(_) => "NonReadStatement",
            Error::Timeout(_) => "Timeout",
            Error::Parse(_) => "ParseError",
            Error::EvalError(_) => "EvalError",
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// Strips stage and batch wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::BatchElement { source, .. } => source.root(),
            other => other,
        }
    }
}
