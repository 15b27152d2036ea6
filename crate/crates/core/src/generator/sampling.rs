use serde::{Deserialize, Serialize};

use super::prompt::{serialize_act_prompt, serialize_state_prompt, Prompt};
use super::verbalize::{parse_act_response, parse_state};
use super::{CompletionRequest, GeneratorBackend};
use crate::error::{BackendError, ModelError, PipelineError};
use crate::model::{BeliefState, Dialog, DialogAct, DialogContext, SystemTurn, Turn};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Sampled generations per stage, on top of the greedy one.
    pub k: usize,
    pub temperature: f64,
    pub seed: u64,
    pub include_greedy: bool,
    pub max_tokens: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            k: 2,
            temperature: 1.0,
            seed: 0,
            include_greedy: true,
            max_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Continuation {
    pub acts: Vec<DialogAct>,
    pub response: String,
}

/// A distinct sampled state with its distinct continuations.
///
/// `greedy` and `sampled` map generation slots onto `continuations`;
/// `sampled[i]` is where the i-th sampled continuation landed after dedup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCandidate {
    pub state: BeliefState,
    pub continuations: Vec<Continuation>,
    pub greedy: Option<usize>,
    pub sampled: Vec<usize>,
}

/// Everything sampled for one turn: distinct states (greedy first) and,
/// per state, distinct continuations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTurnSet {
    pub turn: usize,
    pub states: Vec<StateCandidate>,
    pub greedy: Option<usize>,
    pub sampled: Vec<usize>,
    pub diagnostics: Vec<String>,
}

impl SampledTurnSet {
    /// (state, continuation) indices of the all-greedy generation; falls back
    /// to the first sampled slot when greedy decoding was disabled.
    pub fn greedy_pick(&self) -> (usize, usize) {
        let s = self.greedy.or_else(|| self.sampled.first().copied()).unwrap_or(0);
        let cand = &self.states[s];
        let c = cand.greedy.or_else(|| cand.sampled.first().copied()).unwrap_or(0);
        (s, c)
    }

    /// Indices for sampled state slot `state_slot` and continuation slot
    /// `cont_slot`, both clamped to the available slots.
    pub fn sampled_pick(&self, state_slot: usize, cont_slot: usize) -> (usize, usize) {
        let s = match self.sampled.len() {
            0 => self.greedy.unwrap_or(0),
            n => self.sampled[state_slot.min(n - 1)],
        };
        let cand = &self.states[s];
        let c = match cand.sampled.len() {
            0 => cand.greedy.unwrap_or(0),
            n => cand.sampled[cont_slot.min(n - 1)],
        };
        (s, c)
    }

    pub fn system_turn(&self, (s, c): (usize, usize)) -> SystemTurn {
        let cand = &self.states[s];
        let cont = &cand.continuations[c];
        SystemTurn {
            state: cand.state.clone(),
            acts: cont.acts.clone(),
            response: cont.response.clone(),
        }
    }

    pub fn is_complete(&self) -> bool {
        !self.states.is_empty() && self.states.iter().all(|s| !s.continuations.is_empty())
    }
}

fn prompt_id(ctx: &DialogContext, prompt: &Prompt) -> String {
    format!("{}/{}/{}", ctx.dialog_id, ctx.turn_index, prompt.stage)
}

fn request(
    backend: &dyn GeneratorBackend,
    ctx: &DialogContext,
    prompt: &Prompt,
    n: usize,
    greedy: bool,
    cfg: &SamplingConfig,
) -> Result<Vec<String>, PipelineError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let req = CompletionRequest {
        prompt: prompt.text.clone(),
        n,
        greedy,
        temperature: cfg.temperature,
        seed: seed::derive(cfg.seed, &[&prompt.text]),
        max_tokens: cfg.max_tokens,
    };
    let wrap = |source| PipelineError::Backend {
        prompt_id: prompt_id(ctx, prompt),
        source,
    };
    let out = backend.complete(&req).map_err(wrap)?;
    if out.len() != n {
        return Err(wrap(BackendError::Schema(format!(
            "expected {n} completions, got {}",
            out.len()
        ))));
    }
    Ok(out)
}

fn dedup_push<T: PartialEq>(items: &mut Vec<T>, item: T) -> usize {
    match items.iter().position(|x| *x == item) {
        Some(i) => i,
        None => {
            items.push(item);
            items.len() - 1
        }
    }
}

/// Samples states for a context, then continuations for every distinct state.
///
/// Issues one greedy plus `k` sampled generations per stage. Parse problems
/// are recorded as diagnostics; only backend failures are errors.
pub fn sample_turn(
    backend: &dyn GeneratorBackend,
    ctx: &DialogContext,
    cfg: &SamplingConfig,
) -> Result<SampledTurnSet, PipelineError> {
    if cfg.k == 0 {
        return Err(ModelError::Invalid("sampling k must be at least 1".into()).into());
    }
    let mut diagnostics = Vec::new();
    let state_prompt = serialize_state_prompt(ctx);

    let greedy_texts = if cfg.include_greedy {
        request(backend, ctx, &state_prompt, 1, true, cfg)?
    } else {
        Vec::new()
    };
    let sampled_texts = request(backend, ctx, &state_prompt, cfg.k, false, cfg)?;

    let mut states: Vec<BeliefState> = Vec::new();
    let mut parse = |text: &str, states: &mut Vec<BeliefState>| {
        let (state, diags) = parse_state(text);
        diagnostics.extend(diags.into_iter().map(|d| format!("turn {} state: {d}", ctx.turn_index)));
        dedup_push(states, state)
    };
    let greedy = greedy_texts.first().map(|t| parse(t, &mut states));
    let sampled: Vec<usize> = sampled_texts.iter().map(|t| parse(t, &mut states)).collect();

    let mut candidates = Vec::with_capacity(states.len());
    for state in states {
        let act_prompt = serialize_act_prompt(ctx, &state);
        let greedy_texts = if cfg.include_greedy {
            request(backend, ctx, &act_prompt, 1, true, cfg)?
        } else {
            Vec::new()
        };
        let sampled_texts = request(backend, ctx, &act_prompt, cfg.k, false, cfg)?;
        let mut continuations = Vec::new();
        let mut parse_cont = |text: &str, continuations: &mut Vec<Continuation>| {
            let parsed = parse_act_response(text);
            diagnostics.extend(
                parsed
                    .diagnostics
                    .into_iter()
                    .map(|d| format!("turn {} act/response: {d}", ctx.turn_index)),
            );
            dedup_push(
                continuations,
                Continuation {
                    acts: parsed.acts,
                    response: parsed.response,
                },
            )
        };
        let g = greedy_texts.first().map(|t| parse_cont(t, &mut continuations));
        let s = sampled_texts.iter().map(|t| parse_cont(t, &mut continuations)).collect();
        candidates.push(StateCandidate {
            state,
            continuations,
            greedy: g,
            sampled: s,
        });
    }

    Ok(SampledTurnSet {
        turn: ctx.turn_index,
        states: candidates,
        greedy,
        sampled,
        diagnostics,
    })
}

/// Samples every turn of a ground-truth dialog; contexts always come from
/// the ground truth, so all samples share the same skeleton.
pub fn sample_dialog(
    backend: &dyn GeneratorBackend,
    dialog: &Dialog,
    cfg: &SamplingConfig,
) -> Result<Vec<SampledTurnSet>, PipelineError> {
    dialog
        .contexts()
        .iter()
        .map(|ctx| sample_turn(backend, ctx, cfg))
        .collect()
}

/// Greedy state and greedy act/response for every turn of `dialog`,
/// conditioned on ground-truth history.
pub fn greedy_dialog(
    backend: &dyn GeneratorBackend,
    dialog: &Dialog,
    cfg: &SamplingConfig,
) -> Result<Dialog, PipelineError> {
    let mut turns = Vec::with_capacity(dialog.turns.len());
    for ctx in dialog.contexts() {
        let state_prompt = serialize_state_prompt(&ctx);
        let (state, _) = parse_state(&request(backend, &ctx, &state_prompt, 1, true, cfg)?[0]);
        let act_prompt = serialize_act_prompt(&ctx, &state);
        let parsed = parse_act_response(&request(backend, &ctx, &act_prompt, 1, true, cfg)?[0]);
        turns.push(Turn {
            user: ctx.user.clone(),
            system: SystemTurn {
                state,
                acts: parsed.acts,
                response: parsed.response,
            },
        });
    }
    Ok(Dialog {
        id: dialog.id.clone(),
        goal_id: dialog.goal_id.clone(),
        turns,
    })
}
