use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: weight must be strictly positive, got {weight}")]
    NonPositiveWeight { row: usize, weight: f64 },

    #[error("row {row}: malformed record: {reason}")]
    MalformedRecord { row: usize, reason: String },

    #[error("no tripartite structure: {0}")]
    NoTripartiteStructure(&'static str),

    #[error("empty effective graph: no pivot has neighbors on both sides")]
    EmptyEffectiveGraph,

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("brute-force scale guard exceeded: |X|*|Y|*|Z| = {0} > 1e6")]
    ScaleGuard(u128),

    #[error("non-finite value produced at stage `{stage}`")]
    NonFinite { stage: &'static str },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical pipeline, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NonFiniteLoss { .. })
    }
}
