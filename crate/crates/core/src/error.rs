use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RationalError {
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("0/0 encountered while evaluating an unreduced rational function")]
    IndeterminateValue,
    #[error("root polishing did not converge")]
    RootFindingFailure,
    #[error("the zero polynomial has no isolated roots")]
    ZeroPolynomialRoots,
    #[error("coefficient is NaN or infinite")]
    NonFiniteCoefficient,
    #[error("division by the zero rational function")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("coordinate {component} = {value} lies outside the unit disc")]
    DomainViolation { component: usize, value: Complex64 },
    #[error("point is not metrically ordinary ({reason})")]
    SingularMetricPoint { reason: String },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("expected a point with {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Rational(#[from] RationalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error("tolerance {0} outside [1e-12, 1e-3]")]
    InvalidTolerance(f64),
    #[error("path does not start at the state's parameter value")]
    PathStartMismatch,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("leg {0} does not start where the previous leg ends")]
    Discontinuous(usize),
    #[error("arc radius must be positive and finite")]
    BadRadius,
    #[error("non-finite path coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoercivityError {
    #[error("a != 0 and b^2 - 4ac = 0: no primitive form covers this triple")]
    DegenerateTriple,
    #[error("(a, b, c) = (0, 0, 0)")]
    AllZero,
    #[error("metric is not in the quadratic warped family: {0}")]
    PatternMismatch(String),
    #[error("no metrically ordinary base point found on the search grid")]
    NoOrdinaryBasePoint,
    #[error("tuple count must be at least 1")]
    NoTuples,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("cannot parse complex number {0:?}")]
    Complex(String),
    #[error("cannot parse path: {0}")]
    Path(String),
    #[error("polynomial degree {0} exceeds the supported maximum")]
    DegreeTooLarge(usize),
    #[error("unknown synthetic system {0:?}")]
    UnknownSynthetic(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Rational(#[from] RationalError),
    #[error(transparent)]
    PathShape(#[from] PathError),
}
