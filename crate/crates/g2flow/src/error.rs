use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two forms (or fields) of different dimension were combined.
    DimensionMismatch { left: usize, right: usize },
    /// A symmetric matrix failed the positive-definiteness test.
    NotPositiveDefinite { minor: usize, value: f64 },
    /// A coframe matrix is singular (or nearly so).
    DegenerateCoframe { det: f64 },
    /// Recovered orientation is wrong: `det M ≤ 0` in the form decomposition.
    OrientationViolation { det: f64 },
    /// A matrix that must be symmetric came out asymmetric beyond tolerance.
    AsymmetricRecovery { defect: f64, tol: f64 },
    /// Exterior derivative requested on a top-degree form field.
    TopDegreeForm,
    /// Derivative axis out of range.
    InvalidAxis { axis: usize },
    /// Grid too small for the requested operator or construction.
    GridTooSmall { need: usize, got: usize },
    /// A field that must stay positive reached the positivity guard.
    PositivityViolation { min: f64 },
    /// Hessian data fails the curl (integrability) precondition.
    NotIntegrable { residual: f64, tol: f64 },
    /// The requested box leaves the contractible (non-wrapping) index range.
    PeriodicWrap { want: usize, have: usize },
    /// A stated precondition of an operation does not hold.
    Precondition {
        what: &'static str,
        value: f64,
        tol: f64,
    },
    /// Scenario/config parse error with 1-based line number.
    Config { line: usize, msg: String },
    /// Unknown check suite name.
    UnknownSuite(String),
    /// Command-line usage error.
    Usage(String),
    /// I/O or file-format error.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            Error::NotPositiveDefinite { minor, value } => {
                write!(
                    f,
                    "matrix not positive definite: leading minor {minor} = {value:e}"
                )
            }
            Error::DegenerateCoframe { det } => write!(f, "degenerate coframe: det = {det:e}"),
            Error::OrientationViolation { det } => {
                write!(f, "orientation violation: recovered det M = {det:e} ≤ 0")
            }
            Error::AsymmetricRecovery { defect, tol } => {
                write!(
                    f,
                    "recovered matrix asymmetric: defect {defect:e} > tol {tol:e}"
                )
            }
            Error::TopDegreeForm => write!(f, "exterior derivative of a top-degree form field"),
            Error::InvalidAxis { axis } => write!(f, "invalid axis {axis} (expected 0..3)"),
            Error::GridTooSmall { need, got } => {
                write!(f, "grid too small: need at least {need} points, got {got}")
            }
            Error::PositivityViolation { min } => {
                write!(f, "positivity violation: min value {min:e}")
            }
            Error::NotIntegrable { residual, tol } => {
                write!(
                    f,
                    "field not integrable: curl residual {residual:e} > tol {tol:e}"
                )
            }
            Error::PeriodicWrap { want, have } => {
                write!(
                    f,
                    "box of extent {want} would wrap a periodic axis of {have} points"
                )
            }
            Error::Precondition { what, value, tol } => {
                write!(f, "precondition failed: {what} = {value:e} exceeds {tol:e}")
            }
            Error::Config { line, msg } => write!(f, "config error at line {line}: {msg}"),
            Error::UnknownSuite(name) => write!(f, "unknown check suite `{name}`"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
