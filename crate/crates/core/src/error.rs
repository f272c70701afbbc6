use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the module that raises them; the CLI maps them
/// onto exit codes and the FFI crate onto status codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // configuration
    #[error("positions {first} and {second} coincide (distance {distance:e})")]
    DuplicatePosition {
        first: usize,
        second: usize,
        distance: f64,
    },
    #[error("charge {index} is zero")]
    ZeroCharge { index: usize },
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),

    // field evaluation
    #[error("evaluation point coincides with charge {index}")]
    EvaluationOnCharge { index: usize },
    #[error("spheres {first} and {second} overlap")]
    OverlappingSpheres { first: usize, second: usize },
    #[error("dimension {0} is not supported by this operation")]
    UnsupportedDimension(usize),

    // onsager
    #[error("operation needs at least two charges")]
    SingleCharge,
    #[error("charge {index} is {q}, expected +1 or -1")]
    NonUnitCharge { index: usize, q: f64 },

    // equilibrium
    #[error("jacobian is numerically singular")]
    SingularJacobian,
    #[error("no convergence after {iterations} iterations (residual {residual:e}): {reason}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        reason: String,
    },
    #[error("linear system is numerically rank deficient (rank {rank} of {unknowns})")]
    DegenerateSystem { rank: usize, unknowns: usize },

    // moments
    #[error("evaluation point too close to the density support (|z| = {distance}, need {required})")]
    PointTooClose { distance: f64, required: f64 },

    // maxwell
    #[error("point is not critical (|grad U| = {residual:e})")]
    NotCritical { residual: f64 },
    #[error("seed point is not on a degenerate critical curve (hessian rank {rank})")]
    SeedNotDegenerate { rank: usize },
    #[error("curve corrector diverged after {points} points")]
    CorrectorDiverged { points: usize },
    #[error("trace does not cross the plane")]
    NoCrossing,

    // faraday
    #[error("measure has no positive mass")]
    NoPositiveSupport,
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Variant name, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DuplicatePosition { .. } => "DuplicatePosition",
            Self::ZeroCharge { .. } => "ZeroCharge",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::InvalidInput(_) => "InvalidInput",
            Self::EvaluationOnCharge { .. } => "EvaluationOnCharge",
            Self::OverlappingSpheres { .. } => "OverlappingSpheres",
            Self::UnsupportedDimension(_) => "UnsupportedDimension",
            Self::SingleCharge => "SingleCharge",
            Self::NonUnitCharge { .. } => "NonUnitCharge",
            Self::SingularJacobian => "SingularJacobian",
            Self::NoConvergence { .. } => "NoConvergence",
            Self::DegenerateSystem { .. } => "DegenerateSystem",
            Self::PointTooClose { .. } => "PointTooClose",
            Self::NotCritical { .. } => "NotCritical",
            Self::SeedNotDegenerate { .. } => "SeedNotDegenerate",
            Self::CorrectorDiverged { .. } => "CorrectorDiverged",
            Self::NoCrossing => "NoCrossing",
            Self::NoPositiveSupport => "NoPositiveSupport",
            Self::Precondition(_) => "Precondition",
        }
    }

    /// True for outcomes that are mathematical negatives (no convergence,
    /// no crossing, ...) rather than bad input.
    pub fn is_negative_outcome(&self) -> bool {
        matches!(
            self,
            Self::NoConvergence { .. }
                | Self::SingularJacobian
                | Self::DegenerateSystem { .. }
                | Self::CorrectorDiverged { .. }
                | Self::NoCrossing
        )
    }
}
