use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("resolution {resolution} is below the {required} points needed for kmax = {kmax}")]
    BelowNyquist {
        resolution: usize,
        required: usize,
        kmax: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("blow-up monitor triggered at t = {time}: running L4 norm {norm} exceeds threshold")]
    BlowUp { time: f64, norm: f64 },

    #[error("non-finite value detected at t = {time}")]
    NonFinite { time: f64 },

    #[error("Picard iteration did not converge: residual {residual:e} after {iterations} iterations")]
    PicardNotConverged { residual: f64, iterations: usize },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
