use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter bounds violated: {}", .0.join("; "))]
    Violation(Vec<String>),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("empty gamma range ({lower}, {upper}) for a configuration classified as existing")]
    EmptyRange { lower: f64, upper: f64 },

    #[error("radius {0} outside (0, 1]")]
    Domain(f64),

    #[error("gradient factor vanishes at r = {0} with m < 2")]
    SingularGradient(f64),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("kernel not integrable: {0}")]
    NonIntegrable(String),

    #[error("integrand not integrable at the origin: exponent {exponent} >= {threshold}")]
    NotIntegrable { exponent: f64, threshold: f64 },

    #[error("quadrature tolerance not met: estimated error {estimate:e} > {target:e}")]
    ToleranceNotMet { estimate: f64, target: f64 },

    #[error("solution blew up near r = {0}")]
    Blowup(f64),

    #[error("solution reached zero near r = {0}")]
    HitZero(f64),

    #[error("step size underflow at r = {0}")]
    StepUnderflow(f64),

    #[error("shooting bracket does not straddle the target: {0}")]
    NoBracket(String),

    #[error("maximum iterations ({0}) reached")]
    MaxIter(usize),

    #[error("monotonicity violated between iterates {k} and {next} at r = {r} (difference {diff:e})")]
    MonotonicityViolation { k: usize, next: usize, r: f64, diff: f64 },

    #[error("fit window too short: {0}")]
    WindowTooShort(String),

    #[error("closed form is negative at r = {r} (value {value:e})")]
    NegativeLhs { r: f64, value: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures that come from a numerical method rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ToleranceNotMet { .. }
                | Error::NonIntegrable(_)
                | Error::Blowup(_)
                | Error::HitZero(_)
                | Error::StepUnderflow(_)
                | Error::NoBracket(_)
                | Error::MaxIter(_)
                | Error::MonotonicityViolation { .. }
                | Error::SingularGradient(_)
                | Error::GridTooCoarse(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
