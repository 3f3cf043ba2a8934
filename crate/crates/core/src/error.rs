use thiserror::Error;

/// Errors produced by the beamforming library.
#[derive(Debug, Error)]
pub enum HybfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("unknown hotspot (section {section}, index {index})")]
    UnknownHotspot { section: usize, index: usize },

    #[error("beam matrix violates the per-antenna power constraint (max row excess {excess:.3e})")]
    Infeasible { excess: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("scenario generation failed: section {section} empty after {attempts} attempts")]
    EmptySection { section: usize, attempts: usize },

    #[error("relaxed solver did not converge in {iterations} iterations (residual {residual:.3e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("Armijo search exhausted {backtracks} backtracks at iteration {iteration}")]
    ArmijoExhausted { iteration: usize, backtracks: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl HybfError {
    /// True for failures of an optimization routine, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            HybfError::SolverNotConverged { .. } | HybfError::ArmijoExhausted { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, HybfError>;
