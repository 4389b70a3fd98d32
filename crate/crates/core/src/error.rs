use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicsError {
    #[error("need at least 4 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knots {0} and {1} coincide")]
    DegenerateKnots(usize, usize),
    #[error("pin flags ({pins}) do not match knot count ({knots})")]
    PinCountMismatch { knots: usize, pins: usize },
    #[error("non-finite knot coordinate at index {0}")]
    NonFiniteKnot(usize),
    #[error("spline tangent vanishes at knot {0}")]
    SingularTangent(usize),
    #[error("image must be at least 4x4, got {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("intensity {value} at ({x}, {y}) is outside [0, 1]")]
    IntensityOutOfRange { x: usize, y: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("OPI needs {needed} iterations of history, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("point ({x}, {y}) lies outside the {width}x{height} image")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("empty image stack")]
    EmptyStack,
    #[error("unknown fixture '{0}'")]
    UnknownFixture(String),
    #[error("slice {index}: {source}")]
    Slice {
        index: usize,
        #[source]
        source: Box<PicsError>,
    },
}

pub type Result<T, E = PicsError> = std::result::Result<T, E>;
