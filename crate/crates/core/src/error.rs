use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("episode is over")]
    EpisodeOver,
    #[error("observation shape mismatch: {0}")]
    ObservationShape(String),
    #[error("illegal intervention: {0}")]
    IllegalIntervention(String),
    #[error("time {time} out of range for a trace of length {len}")]
    TimeOutOfRange { time: u32, len: u32 },
    #[error("feature `{feature}` produced `{value}`, which is outside its domain")]
    OutOfDomain { feature: String, value: String },
    #[error("unknown regime `{0}`")]
    UnknownRegime(String),
    #[error("structure is cyclic through `{0}`")]
    Cyclic(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no value `{value}`")]
    UnknownValue { variable: String, value: String },
    #[error("evidence has zero probability under the model")]
    ZeroEvidence,
    #[error("`{0}` is not a directed path in the model")]
    NotAPath(String),
    #[error("every hypothesis assigns zero likelihood to the evidence")]
    ZeroLikelihood,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("table rows do not line up: {0}")]
    LabelMismatch(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
