use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = FsrkError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FsrkError {
    #[error("unknown {kind} `{name}`; available: {}", available.join(", "))]
    CatalogueMiss {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("resolvent is near-singular at z = {z:?} (condition estimate {condition:.3e})")]
    PoleProximity { z: Vec<Complex64>, condition: f64 },

    #[error("stage solve failed at splitting stage {stage}, operator {operator}, RK stage {rk_stage}: {reason} (residual {residual:.3e})")]
    StageSolve {
        stage: usize,
        operator: usize,
        rk_stage: usize,
        residual: f64,
        reason: String,
    },

    #[error("|R| < 1 does not hold on any neighbourhood (-eps, 0) of the ray")]
    DegenerateRay,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
