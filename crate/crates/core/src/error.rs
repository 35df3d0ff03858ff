use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid position: {0}")]
    InvalidPosition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("over-constrained scenario: {users} users for {elements} elements")]
    OverConstrained { users: usize, elements: usize },

    #[error("singular constraints: {0}")]
    SingularConstraints(String),

    #[error("degenerate scenario: condition estimate {condition:e} exceeds {limit:e}")]
    DegenerateScenario { condition: f64, limit: f64 },

    #[error("matrix is not Hermitian positive definite (failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("size mismatch in {file}: expected {expected} bytes, found {found}")]
    SizeMismatch {
        file: String,
        expected: u64,
        found: u64,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
