use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty block")]
    EmptyBlock,
    #[error("non-finite data")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero image")]
    ZeroImage,
    #[error("zero vector")]
    ZeroVector,
    #[error("rank exceeded: requested {requested} of {available}")]
    RankExceeded { requested: usize, available: usize },
    #[error("not normalized")]
    NotNormalized,
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("indefinite kernel for KPCA")]
    IndefiniteKernel,
    #[error("sample count mismatch: block {block} has {found} rows, expected {expected}")]
    SampleCountMismatch {
        block: usize,
        expected: usize,
        found: usize,
    },
    #[error("degenerate weights")]
    DegenerateWeights,
    #[error("negative eigenvalue {value} cannot be used as a merge weight")]
    NegativeEigenvalue { value: f64 },
    #[error("no clients")]
    NoClients,
    #[error("empty graph")]
    EmptyGraph,
    #[error("node {node} out of range for a graph with {p} nodes")]
    NodeOutOfRange { node: usize, p: usize },
    #[error("invalid edge {0}-{1}")]
    InvalidEdge(usize, usize),
    #[error("more clients than features: p = {p}, m = {m}")]
    TooManyClients { p: usize, m: usize },
    #[error("trace already holds {0} rounds")]
    TraceFull(usize),
    #[error("round {round}, client {client}: {source}")]
    Client {
        round: usize,
        client: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: line {line}{}: {msg}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Csv {
        path: String,
        line: usize,
        col: Option<usize>,
        msg: String,
    },
    #[error("{path}: byte {offset}: {msg}")]
    Pgm {
        path: String,
        offset: usize,
        msg: String,
    },
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a malformed experiment description rather
    /// than by a failure while running it.
    pub fn is_spec_error(&self) -> bool {
        matches!(self, Error::InvalidSpec { .. })
    }
}
