use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no observations")]
    NoObservations,
    #[error("invalid time: {0}")]
    InvalidTime(f64),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("no susceptible observations")]
    NoSusceptibleObservations,
    #[error("no observed events")]
    NoObservedEvents,
    #[error("event probability is zero; latency undefined")]
    ZeroEventProbability,
    #[error("invalid survival curve: {0}")]
    InvalidCurve(String),

    #[error("empty stratum: {0}")]
    EmptyStratum(String),
    #[error("bandwidth too small for query point")]
    BandwidthTooSmall,
    #[error("degenerate covariate; supply explicit bandwidth")]
    DegenerateCovariate,
    #[error("missing age covariate on observation {0}")]
    MissingAge(usize),
    #[error("invalid kernel configuration: {0}")]
    InvalidKernel(String),

    #[error("underdetermined fit: need at least 2 jumps, found {0}")]
    UnderdeterminedFit(usize),
    #[error("non-finite objective at shape={shape}, scale={scale}")]
    NonFiniteObjective { shape: f64, scale: f64 },
    #[error("invalid Weibull parameters: shape={shape}, scale={scale}")]
    InvalidWeibull { shape: f64, scale: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("empty capacity range: {0}")]
    EmptyRange(String),
    #[error("configs are not comparable: {0}")]
    ConfigMismatch(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    Field {
        row: usize,
        column: String,
        message: String,
    },
    #[error("{} line-list rows rejected; first: {}", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
    RejectedRows(Vec<crate::ingest::RowDiagnostic>),

    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
