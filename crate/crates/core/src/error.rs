//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: need at least {min} interior points, got {ny}")]
    GridTooSmall { ny: usize, min: usize },

    #[error("invalid grid parameter: {0}")]
    GridParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("wavenumber mismatch: {left} vs {right}")]
    WavenumberMismatch { left: usize, right: usize },

    #[error("Poisson solve rejected for k = 0; the shear velocity comes from an antiderivative, not an inverse Laplacian")]
    ZeroModePoisson,

    #[error("time-weighted functional is defined for x-dependent bands only (k >= 1)")]
    ZeroModeFunctional,

    #[error("constant constraint `{name}` fails at epsilon = {eps}")]
    ConstraintViolation { name: &'static str, eps: f64 },

    #[error("time series too short: need at least {min} samples, got {len}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("empty fit window: no samples in [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("CFL violation: dt = {dt:.3e} exceeds the advisory limit {dt_max:.3e}")]
    CflViolation { dt: f64, dt_max: f64 },

    #[error("aliasing guard: physical x-grid has {nx} points, need at least {min} for kmax = {kmax}")]
    AliasingGuard { nx: usize, min: usize, kmax: usize },

    #[error("dense operator refused: ny = {ny} exceeds the cost guard {max}")]
    MatrixTooLarge { ny: usize, max: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
