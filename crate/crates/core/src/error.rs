use thiserror::Error;

/// Errors surfaced by the engine. The CLI maps `InvalidConfig`-like cases to
/// exit code 2 and everything else to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("basis for N = {n} has {dim} states, exceeding the cap of {cap}")]
    BasisTooLarge { n: u32, dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator failed hermiticity audit: max |H - H^dag| = {deviation:.3e} (tol {tol:.3e})")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("eigensolver did not converge: {0}")]
    EigenFailure(String),

    #[error("propagation failed: {0}")]
    PropagationFailure(String),

    #[error("norm drift {drift:.3e} exceeds bound {bound:.3e}")]
    NormDrift { drift: f64, bound: f64 },

    #[error(
        "drive amplitude too large for the linearized form: |A|/3 = {ratio:.3e} > {bound:.3e} \
         (use the unchecked builder or the exact-drive propagator to override)"
    )]
    DriveAmplitude { ratio: f64, bound: f64 },

    #[error("protocol aborted at {stage}: {diagnostic}")]
    ProtocolAbort { stage: &'static str, diagnostic: String },

    #[error("fit rejected: residual {residual:.3e} above bound {bound:.3e} ({context})")]
    FitRejected { residual: f64, bound: f64, context: String },

    #[error("non-finite value produced in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
