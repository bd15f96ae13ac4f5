use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero vector has no projective class")]
    ZeroVector,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("points coincide within tolerance (chordal distance {distance:e})")]
    DegenerateJoin { distance: f64 },
    #[error("6-vector is off the Klein quadric (residual {residual:e})")]
    OffQuadric { residual: f64 },
    #[error("image frame is ill-conditioned (condition number {condition:e})")]
    ConditioningLoss { condition: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("line does not pass through the pencil point (residual {residual:e})")]
    NotInPencil { residual: f64 },
    #[error("cannot invert the zero quaternion")]
    ZeroDivisor,
    #[error("generator is projectively trivial (scalar matrix)")]
    NotClassifiable,
    #[error("classification failed: {0}")]
    Unclassified(String),
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("genericity exhausted after {attempts} consecutive rejected samples")]
    GenericityExhausted { attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
