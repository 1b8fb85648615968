use thiserror::Error;

pub type Result<T> = std::result::Result<T, BoundError>;

/// Errors raised by the bound library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("matrix is not positive semi-definite: minimum eigenvalue {min_eigenvalue:e} below tolerance -{tolerance:e}")]
    NotPositiveSemiDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("parameter `{name}` = {value} is out of range ({expected})")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("no correlation supplied for assets ({0}, {1})")]
    MissingCorrelation(usize, usize),

    #[error("correlation matrix is not positive semi-definite: minimum eigenvalue {min_eigenvalue:e}")]
    CorrelationNotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("inconsistent moments: E[sqrt a]^2 = {sqrt_moment_squared} exceeds E[a] = {mean}")]
    MomentInconsistency { mean: f64, sqrt_moment_squared: f64 },

    #[error("price {price} lies outside the arbitrage bounds [{lower}, {upper}]")]
    PriceOutsideArbitrageBounds { price: f64, lower: f64, upper: f64 },

    #[error("partition cell {cell} has mass {mass:e} below the floor {floor:e}")]
    DegenerateCell { cell: usize, mass: f64, floor: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("quadrature did not reach tolerance {tolerance:e} within {panels} panels (estimate {estimate:e})")]
    QuadratureBudgetExceeded {
        tolerance: f64,
        panels: usize,
        estimate: f64,
    },

    #[error("angle {chi} outside the valid range [{lower}, {upper})")]
    AngleOutOfRange { chi: f64, lower: f64, upper: f64 },

    #[error("optimal angle {formula} disagrees with scan maximum {scan}")]
    BranchResolutionFailure { formula: f64, scan: f64 },

    #[error("shifted {what} = {value} is not positive")]
    NegativeShiftedRate { what: &'static str, value: f64 },

    #[error("curve shape violation: {0}")]
    ShapeViolation(String),
}

impl BoundError {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            BoundError::NotPositiveSemiDefinite { .. } => "NotPositiveSemiDefinite",
            BoundError::DimensionMismatch { .. } => "DimensionMismatch",
            BoundError::ConvergenceFailure { .. } => "ConvergenceFailure",
            BoundError::ParameterOutOfRange { .. } => "ParameterOutOfRange",
            BoundError::InvalidMatrix(_) => "InvalidMatrix",
            BoundError::MissingCorrelation(..) => "MissingCorrelation",
            BoundError::CorrelationNotPositiveSemiDefinite { .. } => {
                "CorrelationNotPositiveSemiDefinite"
            }
            BoundError::MomentInconsistency { .. } => "MomentInconsistency",
            BoundError::PriceOutsideArbitrageBounds { .. } => "PriceOutsideArbitrageBounds",
            BoundError::DegenerateCell { .. } => "DegenerateCell",
            BoundError::InvalidPartition(_) => "InvalidPartition",
            BoundError::QuadratureBudgetExceeded { .. } => "QuadratureBudgetExceeded",
            BoundError::AngleOutOfRange { .. } => "AngleOutOfRange",
            BoundError::BranchResolutionFailure { .. } => "BranchResolutionFailure",
            BoundError::NegativeShiftedRate { .. } => "NegativeShiftedRate",
            BoundError::ShapeViolation(_) => "ShapeViolation",
        }
    }
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(BoundError::ParameterOutOfRange {
            name,
            value,
            expected,
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    check_range(name, value, value > 0.0 && value.is_finite(), "> 0")
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    check_range(name, value, (0.0..=1.0).contains(&value), "in [0, 1]")
}

pub(crate) fn check_correlation(name: &'static str, value: f64) -> Result<()> {
    check_range(name, value, (-1.0..=1.0).contains(&value), "in [-1, 1]")
}
