use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("band limit {band} is not below the Nyquist index {nyquist} of an axis")]
    BandLimit { band: usize, nyquist: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("A not invertible on this probe: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("orthogonal projector unavailable: {0}")]
    OrthogonalUnavailable(String),
    #[error("frequency fit failed: {0}")]
    FitFailure(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
