use thiserror::Error;

use crate::splitting::CflReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("reference field has zero norm")]
    ZeroNorm,

    #[error("region of interest does not intersect the grid along {0}")]
    EmptyRegion(&'static str),

    #[error("CFL condition violated: {0}")]
    Cfl(CflReport),

    #[error("solution became unstable at sigma = {sigma} (max |V| = {max_abs})")]
    Instability { sigma: f64, max_abs: f64 },

    #[error("wall-clock budget of {budget_s:.0} s exceeded (elapsed {elapsed_s:.1} s, projected total {projected_s:.0} s)")]
    BudgetExceeded {
        budget_s: f64,
        elapsed_s: f64,
        projected_s: f64,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
