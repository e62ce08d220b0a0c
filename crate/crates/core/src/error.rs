use thiserror::Error;

#[derive(Debug, Error)]
pub enum MartlabError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("past state does not match model variant (model {model}, past {past})")]
    PastMismatch { model: &'static str, past: &'static str },
    #[error("insufficient past depth: need {needed}, have {available}")]
    InsufficientPast { needed: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("unsupported model for {0}")]
    Unsupported(String),
    #[error("profile too short and tail not extrapolable: {0}")]
    TailNotExtrapolable(String),
    #[error("gate condition {condition} reported {verdict}")]
    GateFailed { condition: String, verdict: String },
    #[error("empty sample")]
    EmptySample,
    #[error("sample size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("degenerate marginal law: {0}")]
    DegenerateMarginal(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = MartlabError> = std::result::Result<T, E>;
