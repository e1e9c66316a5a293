use thiserror::Error;

/// Errors shared across the construction and projection pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("loop evaluation at lambda = 0 is undefined for series with negative powers")]
    ZeroLambda,
    #[error("loop is singular: no invertible constant term after monomial normalization")]
    SingularLoop,
    #[error("truncation tail above tolerance ({tail:.3e} > {tol:.3e}); increase max degree")]
    TailOverflow { tail: f64, tol: f64 },
    #[error("Birkhoff factorization failed at (u, v) = ({u}, {v}): loop is off the big cell")]
    OffBigCell { u: f64, v: f64 },
    #[error("loop is not invertible")]
    NotInvertible,
    #[error("mu = {0} degenerates; use --sym for mu = 1")]
    DegenerateMu(f64),
    #[error("unknown builtin potential `{0}` (expected `revolution` or `amsler`)")]
    UnknownBuiltin(String),
    #[error("config error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("twisting violation at {path}: {message}")]
    TwistingViolation { path: String, message: String },
    #[error("degree violation at {path}: {message}")]
    DegreeViolation { path: String, message: String },
    #[error("matrix is not in SU(2) within tolerance")]
    NotUnitary,
    #[error("vector is not unit norm")]
    NotUnitNorm,
    #[error("point is at the south pole (-1,0,0,0); stereographic projection undefined")]
    AtSouthPole,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
