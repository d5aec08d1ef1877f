use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySamples,

    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {point:?} lies outside the domain of definition")]
    OutOfDomain { point: Vec<f64> },

    #[error("finite-difference stencil at {point:?} leaves the domain")]
    StencilOutOfDomain { point: Vec<f64> },

    #[error("mollifier radius does not fit: margin {margin:.3e}, need k >= {required_k}")]
    MarginTooSmall { margin: f64, required_k: u32 },

    #[error("inner set touches the boundary of the outer set (margin {margin:.3e})")]
    ZeroMargin { margin: f64 },

    #[error("ellipticity violated at {point:?}: value {value:.6e}")]
    NotElliptic { point: Vec<f64>, value: f64 },

    #[error("zeroth-order coefficient c = {value:.6e} > 0 at {point:?}; shift the operator by omega = sup c first")]
    PositiveZerothOrder { point: Vec<f64>, value: f64 },

    #[error("external sphere condition fails: boundary sample {sample:?} lies in the closed ball")]
    SphereCondition { sample: Vec<f64> },

    #[error("singular Jacobian at {point:?} (|det| = {det:.3e})")]
    SingularJacobian { point: Vec<f64>, det: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("inadmissible input: {what} (residual {residual:.3e} > tolerance {tolerance:.1e})")]
    Inadmissible { what: String, residual: f64, tolerance: f64 },

    #[error("operator has cross terms on the flat boundary (max |a_in| = {max_abs:.3e}); apply a flattening map first")]
    CrossTerms { max_abs: f64 },

    #[error("point {point:?} is not covered")]
    Uncovered { point: Vec<f64> },

    #[error("chart membership failed: {}", failures.join("; "))]
    ChartMembership { failures: Vec<String> },

    #[error("ball (center {center:?}, radius {radius}) is not compactly inside the domain")]
    BallNotInside { center: Vec<f64>, radius: f64 },

    #[error("discrete system is singular (pivot {pivot:.3e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("iterative solver stalled after {iterations} iterations (residual {residual:.3e})")]
    SolverStalled { iterations: usize, residual: f64 },

    #[error("Perron sweep {sweep} decreased the subfunction by {decrease:.3e}")]
    Monotonicity { sweep: usize, decrease: f64 },

    #[error("Perron sweep {sweep} exceeded the upper comparison function by {excess:.3e}")]
    ComparisonViolated { sweep: usize, excess: f64 },

    #[error("shift mu = {mu} must exceed omega = {omega}")]
    ShiftTooSmall { mu: f64, omega: f64 },

    #[error("time step {dt} too large: 1/dt must exceed omega = {omega}")]
    StepTooLarge { dt: f64, omega: f64 },

    #[error("function vanishes identically")]
    ZeroFunction,

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("malformed grid file: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
