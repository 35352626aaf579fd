use thiserror::Error;

pub type Result<T> = std::result::Result<T, ZwalkError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZwalkError {
    #[error("invalid walk spec: {0}")]
    InvalidSpec(String),
    #[error("index {n} outside table window [{lo}, {hi}]")]
    IndexOutOfWindow { n: i64, lo: i64, hi: i64 },
    #[error("continued fraction hypothesis violated at depth {depth}: {what}")]
    HypothesisViolated { depth: usize, what: String },
    #[error("no stochastic range: H' = {h_prime} exceeds H = {h}")]
    NoStochasticRange { h: f64, h_prime: f64 },
    #[error("continued fractions did not converge within depth {depth}")]
    NonConvergent { depth: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("free parameter {param} outside [{lo}, {hi}]")]
    OutOfRange { param: f64, lo: f64, hi: f64 },
    #[error("factor {name} at index {index} left (0,1): {value}")]
    NonPositiveCoefficient { index: i64, name: &'static str, value: f64 },
    #[error("window too small: need [{need_lo}, {need_hi}], have [{lo}, {hi}]")]
    WindowTooSmall { need_lo: i64, need_hi: i64, lo: i64, hi: i64 },
    #[error("zero probability used as divisor at index {0}")]
    DivisionByZeroProbability(i64),
    #[error("polynomial division left remainder {remainder:e} at row {n}")]
    InexactDivision { n: i64, remainder: f64 },
    #[error("degree of row {n} (alpha {alpha}) is {got:?}, expected {expected:?}")]
    DegreeMismatch { n: i64, alpha: usize, expected: Option<usize>, got: Option<usize> },
    #[error("identity {what} fails at row {n}: error {error:e}")]
    IdentityViolated { what: &'static str, n: i64, error: f64 },
    #[error("divergent moment: {0}")]
    DivergentMoment(String),
    #[error("frame does not match measure: {0}")]
    FrameMismatch(String),
    #[error("cannot classify: right endpoint at 1 has no declared exponent")]
    UnclassifiableEndpoint,
}

impl ZwalkError {
    /// Errors that report a failed mathematical precondition rather than bad input.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            ZwalkError::OutOfRange { .. }
                | ZwalkError::DivergentMoment(_)
                | ZwalkError::NoStochasticRange { .. }
                | ZwalkError::PreconditionViolated(_)
                | ZwalkError::HypothesisViolated { .. }
                | ZwalkError::NonConvergent { .. }
                | ZwalkError::NonPositiveCoefficient { .. }
                | ZwalkError::UnclassifiableEndpoint
        )
    }
}
