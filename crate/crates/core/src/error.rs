use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A basis function was evaluated outside its index range or domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An invalid model, basis, or option setting.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("observation {i}, item {j}: value {x} lies outside the basis domain {domain}")]
    OutsideDomain {
        i: usize,
        j: usize,
        x: f64,
        domain: String,
    },

    #[error("{path}: row {row}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },

    #[error("invalid data: {0}")]
    Data(String),

    /// Every component assigns zero density to this observation.
    #[error("observation {i} has zero likelihood under every component")]
    ZeroLikelihood { i: usize },

    #[error("observation {i}, item {j}: slot weights sum to zero")]
    ZeroNormalizer { i: usize, j: usize },

    /// A size limit (enumeration guard, memory budget) was exceeded.
    #[error("guard exceeded: {0}")]
    Guard(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
