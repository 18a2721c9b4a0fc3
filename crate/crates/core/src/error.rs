use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing ellipse for terrain `{terrain}` and gait `{gait}`")]
    MissingEllipse { terrain: String, gait: String },
    #[error("reliability provider failed: {0}")]
    Provider(String),
    #[error("time went backwards: {previous} s then {now} s")]
    TimeRegression { previous: f64, now: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
