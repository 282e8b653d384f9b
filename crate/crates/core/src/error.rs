use thiserror::Error;

pub type Result<T> = std::result::Result<T, PlapError>;

#[derive(Debug, Error)]
pub enum PlapError {
    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// Diffusivity evaluated at mu = |grad v|^2 = 0 with p < 2.
    #[error("singular diffusivity: mu + |grad v|^2 = 0 with p = {p} < 2 (use the mu floor)")]
    Singular { p: f64 },

    #[error("Kacanov iteration did not converge at step {step} after {iterations} iterations (last update {residual:e})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solver stagnated at step {step}: relative residual {residual:e} after {iterations} iterations")]
    LinearSolver {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    /// The local energy bound has no finite value at the requested time.
    #[error("energy bound void: t = {t} is at or beyond the blow-up time {blowup}")]
    BoundVoid { t: f64, blowup: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PlapError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        PlapError::Usage(msg.into())
    }
}
