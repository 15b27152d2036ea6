use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("unknown slot {slot:?} for domain {domain:?}")]
    UnknownSlot { domain: String, slot: String },
    #[error("turn index {index} out of range for dialog of length {len}")]
    TurnOutOfRange { index: usize, len: usize },
    #[error("invalid data: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("domain {0:?} is not part of the user goal")]
    NotInGoal(String),
    #[error("hypothesis count {hypotheses} does not match reference count {references}")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("dialog {dialog:?} references unknown goal {goal:?}")]
    MissingGoal { dialog: String, goal: String },
    #[error("no reference dialog for {0:?}")]
    MissingReference(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Failure talking to a generation backend.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error after {retries} retries: {message}")]
    Transport { retries: u32, message: String },
    #[error("HTTP status {status} after {retries} retries")]
    Http { status: u16, retries: u32 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("backend cannot serve prompt: {0}")]
    Unavailable(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("backend failed on prompt {prompt_id}: {source}")]
    Backend {
        prompt_id: String,
        #[source]
        source: BackendError,
    },
    #[error("missing samples for turn {turn} of dialog {dialog:?}")]
    IncompleteSamples { dialog: String, turn: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
