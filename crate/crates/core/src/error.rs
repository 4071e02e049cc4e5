use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid material at node ({ix}, {iy}): {reason}")]
    InvalidMaterial { ix: usize, iy: usize, reason: String },

    #[error("expression error: {0}")]
    Parse(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("conjugate differential is not exact: loop residual {residual:.3e} exceeds {tol:.3e}")]
    NonExact { residual: f64, tol: f64 },

    #[error("map is not injective: {0}")]
    NonInjective(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("trace identity failed: {0}")]
    TraceIdentity(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("extrapolation outside field: {0}")]
    Extrapolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
