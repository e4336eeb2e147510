use thiserror::Error;

/// Failures raised by the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("curve is not star-shaped about its center: radius {radius:.3e} at angle {theta:.6}")]
    NonStarShaped { theta: f64, radius: f64 },

    #[error("node count {nodes} is too low for Fourier degree {degree} (need an even count >= 4K)")]
    ResolutionTooLow { nodes: usize, degree: usize },

    #[error("highest Fourier mode {tail:.3e} exceeds 0.1 * a0 = {limit:.3e}; curve is under-resolved")]
    UnresolvedCurve { tail: f64, limit: f64 },

    #[error("field has {got} samples but the grid has {expected} nodes")]
    GridMismatch { expected: usize, got: usize },

    #[error("inner and outer boundaries are too close (separation {separation:.3e})")]
    BoundaryTooClose { separation: f64 },

    #[error("boundary integral system is numerically singular")]
    SingularSystem,

    #[error("linearized Robin operator is degenerate (normalized singular value {margin:.3e})")]
    DegenerateOperator { margin: f64 },

    #[error("evaluation point ({x:.4}, {y:.4}) is within the near-boundary guard")]
    TooCloseToBoundary { x: f64, y: f64 },

    #[error("container is not the unit disk")]
    OuterNotDisk,

    #[error("origin is not enclosed by the free boundary")]
    OriginNotEnclosed,

    #[error("Newton correction did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("flow velocity has the wrong sign for the declared case (max p = {max_p:.3e})")]
    SignMismatch { max_p: f64 },

    #[error("stabilization shift mu = {mu} does not make the Robin coefficient positive (min {min_shifted:.3e})")]
    MuTooSmall { mu: f64, min_shifted: f64 },

    #[error("adaptive time step {dt:.3e} fell below the minimum {dt_min:.3e}")]
    StepSizeUnderflow { dt: f64, dt_min: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("linearization is degenerate at r = {0} (the parabolic radius)")]
    DegenerateRadius(f64),

    #[error("Q schedule is not positive: Q({x:.4}, {y:.4}, t={t}) = {value:.3e}")]
    NonPositiveSchedule { x: f64, y: f64, t: f64, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short machine-readable tag used in run artifacts.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonStarShaped { .. } => "NonStarShaped",
            Error::ResolutionTooLow { .. } => "ResolutionTooLow",
            Error::UnresolvedCurve { .. } => "UnresolvedCurve",
            Error::GridMismatch { .. } => "GridMismatch",
            Error::BoundaryTooClose { .. } => "BoundaryTooClose",
            Error::SingularSystem => "SingularSystem",
            Error::DegenerateOperator { .. } => "DegenerateOperator",
            Error::TooCloseToBoundary { .. } => "TooCloseToBoundary",
            Error::OuterNotDisk => "OuterNotDisk",
            Error::OriginNotEnclosed => "OriginNotEnclosed",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SignMismatch { .. } => "SignMismatch",
            Error::MuTooSmall { .. } => "MuTooSmall",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::OutOfRange(_) => "OutOfRange",
            Error::DegenerateRadius(_) => "DegenerateRadius",
            Error::NonPositiveSchedule { .. } => "NonPositiveSchedule",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
