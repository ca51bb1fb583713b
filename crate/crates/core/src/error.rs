use thiserror::Error;

/// Errors raised anywhere in the reconstruction stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("speed of sound {speed} is not positive at ({x}, {y}, {z})")]
    NonPositiveSpeed { speed: f64, x: f64, y: f64, z: f64 },

    #[error("point ({x}, {y}, {z}) is outside the sampled speed grid")]
    OutsideField { x: f64, y: f64, z: f64 },

    #[error("invalid speed field: {0}")]
    InvalidField(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("ray direction is within the polar cone (phi = {phi})")]
    PolarSingularity { phi: f64 },

    #[error("step size fell below the minimum step {h_min}")]
    StepUnderflow { h_min: f64 },

    #[error("invalid step control: {0}")]
    InvalidStepControl(String),

    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),

    #[error("unknown sampling period `{0}`")]
    UnknownPeriod(String),

    #[error("no data points in sampling period")]
    EmptyPeriod,

    #[error("data points belong to different sampling periods (`{0}` and `{1}`)")]
    MixedPeriods(String, String),

    #[error("transmitter ray left the domain at t = {t} before the travel time budget")]
    MeasurementError { t: f64 },

    #[error("{what} ({x}, {y}, {z}) is outside the domain")]
    OutsideDomain {
        what: &'static str,
        x: f64,
        y: f64,
        z: f64,
    },

    #[error("point ({x}, {y}, {z}) is outside the region mesh")]
    OutsideMesh { x: f64, y: f64, z: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("region cache does not cover data point: {0}")]
    StaleCache(String),

    #[error("candidate {candidate} refers to missing data point {data_point}")]
    DanglingCandidate { candidate: usize, data_point: usize },

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
