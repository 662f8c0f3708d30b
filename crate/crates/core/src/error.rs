use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: depth {depth} needs at least {needed} samples, got {got}")]
    InsufficientSamples { depth: usize, needed: usize, got: usize },

    #[error("inconsistent band lengths: {0}")]
    InvalidBands(String),

    #[error("delay of {shift} samples exceeds signal length {len}")]
    DelayTooLong { shift: usize, len: usize },

    #[error("muscle fully slack: path length {path_length} <= tendon slack length {slack_length}")]
    MuscleSlack { path_length: f64, slack_length: f64 },

    #[error("integration diverged at sample {0}")]
    IntegrationDiverged(usize),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("backward requires a scalar output, got {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("constant target sequence: R2 and NMSE are undefined")]
    ConstantTarget,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
