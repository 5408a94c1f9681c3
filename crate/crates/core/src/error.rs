use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("grid too coarse: {nodes} nodes (need at least {min})")]
    GridTooCoarse { nodes: usize, min: usize },
    #[error("assumption (A) violated: `{field}` = {value} must be positive")]
    AssumptionAViolated { field: &'static str, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("domain is a ball and has no inner boundary")]
    NoGamma0,
    #[error("compatibility order {0} is not supported")]
    UnsupportedOrder(u32),
    #[error("incompatible elliptic data: compatibility residual {residual:e} exceeds {tol:e}")]
    IncompatibleData { residual: f64, tol: f64 },
    #[error("singular linear system at pivot {0}")]
    SingularSystem(usize),
    #[error("integral constraint violated: residual {residual:e} exceeds {tol:e}")]
    ConstraintViolated { residual: f64, tol: f64 },
    #[error("harmonic degree mismatch: {0} vs {1}")]
    DegreeMismatch(u32, u32),
    #[error("trajectory sampling too sparse for time quadrature: {0}")]
    QuadratureOrderMismatch(String),
    #[error("linear solve failed: relative residual {0:e}")]
    LinearSolveFailure(f64),
    #[error("unstable blow-up at t = {time}: norm grew by {growth:e}")]
    UnstableBlowup { time: f64, growth: f64 },
    #[error("inadmissible test function: {0}")]
    InadmissibleTestFunction(String),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
