use thiserror::Error;

/// Errors raised anywhere in the detection, simulation and backtest pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("duplicate series id `{0}`")]
    DuplicateId(String),
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate pnl: {0}")]
    DegeneratePnl(String),
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("eigen-solver did not converge: {0}")]
    NoConvergence(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("dates are not strictly increasing: {0}")]
    NonMonotoneDates(String),
    #[error("series `{0}` not found")]
    MissingSeries(String),
    #[error("empty panel: {0}")]
    EmptyPanel(String),
    #[error("series `{0}` cannot be filled: every value is zero")]
    Unfillable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the shape or content of input data rather
    /// than by an out-of-range parameter.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::DuplicateId(_)
                | Error::Parse(_)
                | Error::DuplicateKey(_)
                | Error::NonMonotoneDates(_)
                | Error::MissingSeries(_)
                | Error::EmptyPanel(_)
                | Error::Unfillable(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Domain(_)
                | Error::DegeneratePnl(_)
                | Error::UndefinedCorrelation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
