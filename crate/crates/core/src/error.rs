use thiserror::Error;

/// Every failure the library can report.
///
/// The display string of each variant starts with the variant name so that
/// command-line users (and scripts grepping stderr) can tell which invariant
/// was violated.
#[derive(Debug, Error)]
pub enum Error {
    #[error("NonPositiveParameter: {name} = {value}")]
    NonPositiveParameter { name: String, value: f64 },
    #[error("TieViolation: parameters {first} and {second} are tied but differ")]
    TieViolation { first: String, second: String },
    #[error("UnstableBranching: spectral radius {radius} >= 1")]
    UnstableBranching { radius: f64 },
    #[error("NonConstantBaseline: type {ty} has a time-varying baseline")]
    NonConstantBaseline { ty: usize },
    #[error("NegativeElapsedTime: {0}")]
    NegativeElapsedTime(f64),
    #[error("ReversedInterval: ({a}, {b})")]
    ReversedInterval { a: f64, b: f64 },
    #[error("NonExponentialKernel: kernel ({m}, {j}) is not exponential")]
    NonExponentialKernel { m: usize, j: usize },
    #[error("TimeReversal: cannot move from {from} back to {to}")]
    TimeReversal { from: f64, to: f64 },
    #[error("UnstableExplosion: more than {cap} events simulated")]
    UnstableExplosion { cap: usize },
    #[error("GridHorizonMismatch: grid ends at {grid_end}, path horizon is {horizon}")]
    GridHorizonMismatch { grid_end: f64, horizon: f64 },
    #[error("AllParticlesDead: every particle has zero weight")]
    AllParticlesDead,
    #[error("Degenerate: all particle weights vanished in interval {interval}")]
    Degenerate { interval: usize },
    #[error("NonFiniteLogLik: event {index} has zero intensity")]
    NonFiniteLogLik { index: usize },
    #[error("OptimizerDiverged: {0}")]
    OptimizerDiverged(String),
    #[error("SingularHessian: negative Hessian is not invertible")]
    SingularHessian,
    #[error("DegenerateData: {0}")]
    DegenerateData(String),
    #[error("ChainTooShort: {len} records after burn-in, need at least {min}")]
    ChainTooShort { len: usize, min: usize },
    #[error("GapInDates: row {row} is dated {found}, expected {expected}")]
    GapInDates {
        row: usize,
        found: String,
        expected: String,
    },
    #[error("NonContiguousBoundaries: row {row} starts at {start}, previous row ended at {prev_end}")]
    NonContiguousBoundaries { row: usize, start: f64, prev_end: f64 },
    #[error("NegativeCount: row {row}, column {column}")]
    NegativeCount { row: usize, column: usize },
    #[error("RaggedRow: row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that reject an input (model, parameters, data file)
    /// rather than a failure during computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveParameter { .. }
                | Error::TieViolation { .. }
                | Error::UnstableBranching { .. }
                | Error::NonConstantBaseline { .. }
                | Error::NegativeElapsedTime(_)
                | Error::ReversedInterval { .. }
                | Error::NonExponentialKernel { .. }
                | Error::GridHorizonMismatch { .. }
                | Error::DegenerateData(_)
                | Error::GapInDates { .. }
                | Error::NonContiguousBoundaries { .. }
                | Error::NegativeCount { .. }
                | Error::RaggedRow { .. }
                | Error::InvalidInput(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
