use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("digit {digit} out of range for alphabet of size {alphabet}")]
    DigitOutOfRange { digit: u8, alphabet: u8 },

    #[error("eigenvalue {0} is forbidden for extension")]
    ForbiddenEigenvalue(f64),

    #[error("negative discriminant 25 - 4*{0}")]
    NegativeDiscriminant(f64),

    #[error("{next} is not a decimation root of {eigenvalue}")]
    NotADecimationRoot { eigenvalue: f64, next: f64 },

    #[error("local extension system is singular at eigenvalue {0}")]
    SingularLocalSystem(f64),

    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation not supported on this graph: {0}")]
    UnsupportedGraph(&'static str),

    #[error("{n} vertices exceeds the dense solver cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("unknown cell {0}")]
    UnknownCell(String),

    #[error("average map is singular; the bandlimited space does not match the cell count")]
    SingularSystem,

    #[error("rational map has a pole at {0}")]
    PoleAtDenominator(f64),

    #[error("requested level {requested} exceeds capacity {cap}")]
    CapacityCap { requested: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary convention calibration failed: {0}")]
    Calibration(String),
}
