use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no data")]
    NoData,
    #[error("irregular sampling: {0}")]
    IrregularSampling(String),
    #[error("no complete calendar day in input")]
    NoCompleteDay,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty known set")]
    EmptyKnownSet,
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("signal too short: {0} days, need at least {min}", min = crate::model::MIN_SIGNAL_DAYS)]
    SignalTooShort(usize),
    #[error("signal not scaled")]
    NotScaled,
    #[error("implausible soiling factor {factor} on day {day}")]
    ImplausibleSoilingFactor { day: usize, factor: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
