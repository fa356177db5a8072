use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sensor pose ({x:.4}, {y:.4}) is inside an obstacle")]
    PoseInsideObstacle { x: f64, y: f64 },

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("hard-margin infeasible: {violations} unsafe samples still classified safe at C- = {c_minus:e}")]
    HardMarginInfeasible { c_minus: f64, violations: usize },

    #[error("start outside learned safe set (h_hat = {h:.6})")]
    StartOutsideLearnedSafeSet { h: f64 },

    #[error("start ({x:.4}, {y:.4}) is inside an obstacle")]
    StartInObstacle { x: f64, y: f64 },

    #[error("no collision-free vantage points at spacing {0}")]
    NoFreeVantage(f64),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
