//! Prompting, generation parsing and candidate sampling.

mod http;
mod prompt;
mod sampling;
mod scripted;
mod verbalize;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

pub use http::{HttpBackend, HttpConfig};
pub use prompt::{
    clean_text, serialize_act_prompt, serialize_state_prompt, state_prompt_prefix, Prompt,
    BELIEF_TOKEN, CONTEXT_TOKEN, SYSTEM_TOKEN, USER_TOKEN,
};
pub use sampling::{
    greedy_dialog, sample_dialog, sample_turn, Continuation, SampledTurnSet, SamplingConfig,
    StateCandidate,
};
pub use scripted::{ErrorInjectionConfig, ErrorKind, Injection, ScriptedBackend};
pub use verbalize::{
    parse_act_response, parse_acts, parse_state, verbalize_act_response, verbalize_acts,
    verbalize_state, ParsedActResponse, ACT_TOKEN, RESPONSE_TOKEN,
};

/// One completion request. Serializes to the HTTP wire body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: usize,
    pub greedy: bool,
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: usize,
}

/// Reply body of the completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub completions: Vec<String>,
}

/// Anything that turns a prompt into `n` completions.
///
/// Identical requests must give identical completions; remote backends can
/// only promise this on a best-effort basis.
pub trait GeneratorBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError>;
}

impl<B: GeneratorBackend + ?Sized> GeneratorBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        (**self).complete(request)
    }
}

impl<B: GeneratorBackend + ?Sized> GeneratorBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        (**self).complete(request)
    }
}
