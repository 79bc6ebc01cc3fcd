use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerators sum to {sum}, expected denominator {denominator}")]
    SumMismatch { sum: String, denominator: String },

    #[error("denominator must be positive")]
    ZeroDenominator,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("distribution needs at least 2 coordinates, got {0}")]
    TooFewOutcomes(usize),

    #[error("KL undefined: coordinate {0} has mass in x but not in p")]
    AbsoluteContinuityViolation(usize),

    #[error("outcome index {index} outside [1, {d}]")]
    InvalidOutcome { index: usize, d: usize },

    #[error("derived horizon {0} exceeds the day budget {1}")]
    Overflow(String, u64),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("run needs {days} days, over the budget of {budget}")]
    BudgetExceeded { days: u64, budget: u64 },

    #[error("{what} {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: u64,
        range: String,
    },

    #[error("level {level} counts sum to {sum}, expected {expected}")]
    InconsistentCounts { level: usize, sum: u64, expected: u64 },

    #[error("expected day {expected}, got {got}")]
    OutOfOrderDay { expected: u64, got: u64 },

    #[error("tau tree has no entry for prefix {0:?}")]
    MissingTauEntry(Vec<u32>),

    #[error("day {0} has no mixture")]
    MissingMixture(u64),

    #[error("day {0} has no realized prediction")]
    MissingRealizedPrediction(u64),

    #[error("unknown forecaster {0:?} (expected truthful, uniform or hierarchical)")]
    InvalidForecaster(String),

    #[error("concentration needs an oblivious adversary; {0} is adaptive")]
    AdaptiveAdversaryUnsupported(String),

    #[error("no transcript found in {0}")]
    MissingTranscript(String),

    #[error("corrupt record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
