use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("symbol index {index} out of range for a code with {symbols} symbols")]
    SymbolIndex { index: usize, symbols: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("cannot place {requested} points on a grid with {capacity} points")]
    GridCapacity { requested: usize, capacity: usize },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("correlation coefficient must satisfy |rho| < 1, got {0}")]
    InvalidCorrelation(f64),

    #[error("covariance block is not positive definite")]
    Factorization,

    #[error("{antennas} RU antennas cannot serve {users} users one-to-one")]
    TooFewAntennas { antennas: usize, users: usize },

    #[error("covariance has a non-positive eigenvalue {0}")]
    NonPositiveEigenvalue(f64),

    #[error("argument outside the domain of {function}: {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("outage quantile unreliable: n_trial * p_out = {0} < 10")]
    OutageUnreliable(f64),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("statistical receiver CSI is only defined for precoded (MRT) schemes")]
    UnsupportedCsi,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
