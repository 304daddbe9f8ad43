use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("variable slot {slot} out of range for {vars} variables")]
    SlotOutOfRange { slot: usize, vars: usize },
    #[error("jet degree {degree} outside supported range 1..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("{vars} jet variables requested, at most {max} supported")]
    TooManyVariables { vars: usize, max: usize },
    #[error("jets from different spaces ({left} vs {right} variables)")]
    SpaceMismatch { left: usize, right: usize },
    #[error("division by a jet with zero constant term")]
    ZeroConstantTerm,
    #[error("{op} needs a positive constant term, got {value}")]
    NonPositiveConstantTerm { op: &'static str, value: f64 },
    #[error("jet degree exhausted: needed {needed}, available {available}")]
    InsufficientDegree { needed: usize, available: usize },
    #[error("inadmissible point: {0}")]
    Inadmissible(String),
    #[error("fundamental tensor is not positive definite (pivot {pivot:e})")]
    NotPositiveDefinite { pivot: f64 },
    #[error("dimension {dim} not supported here: {reason}")]
    Dimension { dim: usize, reason: &'static str },
    #[error("quadrature did not converge: node doubling moved ln σ by {drift:e} (tol {tol:e})")]
    QuadratureDrift { drift: f64, tol: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("not an Einstein metric: Ric/F² varies by {spread:e} over directions")]
    NotEinstein { spread: f64 },
    #[error("sampler rejected {rejected} of {drawn} draws")]
    SamplerRejection { rejected: usize, drawn: usize },
    #[error("no fixture for {0}")]
    UnknownFixture(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
