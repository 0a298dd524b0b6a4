use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {n}: {reason}")]
    InvalidGrid { n: usize, reason: &'static str },

    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("blow-up at t = {t:.6}: coefficient magnitude {magnitude:e} exceeds guard")]
    BlowUp { t: f64, magnitude: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last difference {last_diff:e}); outside contraction regime, shrink T")]
    PicardNonContraction { iterations: usize, last_diff: f64 },

    #[error("Gramian solve did not converge in {iterations} iterations (relative residual {residual:e}); grid too fine for horizon or control region too small")]
    GramianIllConditioned { iterations: usize, residual: f64 },

    #[error("local control diverged after {iterations} iterations (difference {last_diff:e}); data too large for local control, shrink delta or T")]
    LocalControlDivergence { iterations: usize, last_diff: f64 },

    #[error("decay stalled in phase {phase}: energy {energy:e} above {threshold:e} at t = {t:.3}")]
    DecayStalled {
        phase: &'static str,
        energy: f64,
        threshold: f64,
        t: f64,
    },

    #[error("forward verification failed: residual {residual:e} exceeds tolerance {tolerance:e}")]
    VerificationFailed { residual: f64, tolerance: f64 },

    #[error("energy vanishes on the fit window; state already at rest")]
    AlreadyAtRest,

    #[error("trajectory too short: {got} samples, need at least {need}")]
    TrajectoryTooShort { got: usize, need: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
