use thiserror::Error;

use crate::coeff::FieldSpec;
use crate::mapfile::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// The budget a computation ran out of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resource {
    /// Stored terms of one step.
    Terms,
    /// Term operations (products and merge steps) within one substitution.
    Work,
}

impl std::fmt::Display for Resource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Resource::Terms => "term",
            Resource::Work => "work",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficients from different fields: {0} and {1}")]
    MixedFields(FieldSpec, FieldSpec),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} exceeds the supported maximum {max}", max = crate::coeff::MAX_MODULUS)]
    ModulusTooLarge(u64),

    #[error("ambient mismatch: {left} vs {right}")]
    AmbientMismatch { left: String, right: String },
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("exponent overflow")]
    ExponentOverflow,

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("linear part J_F(0) is singular")]
    SingularLinearPart,
    #[error("supplied maps are not mutually inverse")]
    NotInverse,

    #[error("{resource} ceiling exceeded at step {step}: {used} > {ceiling}")]
    ResourceLimit { step: usize, resource: Resource, used: u64, ceiling: u64 },
    #[error("map is the identity after normalization; the criterion is vacuous")]
    DegenerateMap,
    #[error("component {0} has H_i = 0, its order is infinite")]
    InfiniteOrder(usize),
    #[error("degree bound {0} does not fit in the exponent range")]
    BoundOverflow(String),
    #[error("H is not homogeneous of one common degree")]
    NotHomogeneous,
    #[error("J_H is not strongly nilpotent")]
    NotStronglyNilpotent,
    #[error("fresh variable names collide with the map's variables")]
    NameCollision,

    #[error("unknown built-in example: {0}")]
    UnknownExample(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}
