use thiserror::Error;

/// Errors raised by the solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix not symmetric")]
    NotSymmetric,
    #[error("beyond finite extensibility: s = {s} outside [0, {limit})")]
    BeyondExtensibility { s: f64, limit: f64 },
    #[error("insufficient q-resolution: normalization mismatch {mismatch:.3e}")]
    InsufficientResolution { mismatch: f64 },
    #[error("CFL violation in {stage}: dt = {dt:.6e} exceeds stable bound, use dt <= {suggested:.6e}")]
    Cfl { stage: &'static str, dt: f64, suggested: f64 },
    #[error("positivity failure: min value {min:.3e}")]
    Positivity { min: f64 },
    #[error("density floor reached: min density {min:.3e}")]
    DensityFloor { min: f64 },
    #[error("nonpositive density {0:.3e}")]
    NonpositiveDensity(f64),
    #[error("requested {requested} modes but the grid resolves only {available}")]
    BeyondNyquist { requested: usize, available: usize },
    #[error("no signal in acoustic trace")]
    NoSignal,
    #[error("projection residual {0:.3e} exceeds tolerance")]
    ProjectionResidual(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
