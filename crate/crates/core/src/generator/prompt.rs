//! Two-stage prompt serialization.
//!
//! State prompts: `[C] [U] <u0> [R] <r0> ... [U] <current>`.
//! Act/response prompts append `[B] <verbalized state>`. Context text is
//! lowercased with whitespace collapsed, so the uppercase segment tokens never
//! occur inside it.

use serde::{Deserialize, Serialize};

use super::verbalize::verbalize_state;
use crate::model::{BeliefState, DialogContext, SubgoalKind};

pub const CONTEXT_TOKEN: &str = "[C]";
pub const USER_TOKEN: &str = "[U]";
pub const SYSTEM_TOKEN: &str = "[R]";
pub const BELIEF_TOKEN: &str = "[B]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub stage: SubgoalKind,
}

pub fn clean_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn push_segment(out: &mut String, token: &str, text: &str) {
    out.push(' ');
    out.push_str(token);
    let text = clean_text(text);
    if !text.is_empty() {
        out.push(' ');
        out.push_str(&text);
    }
}

pub fn serialize_state_prompt(ctx: &DialogContext) -> Prompt {
    let mut text = String::from(CONTEXT_TOKEN);
    for turn in &ctx.history {
        push_segment(&mut text, USER_TOKEN, &turn.user);
        push_segment(&mut text, SYSTEM_TOKEN, &turn.system.response);
    }
    push_segment(&mut text, USER_TOKEN, &ctx.user);
    Prompt {
        text,
        stage: SubgoalKind::State,
    }
}

pub fn serialize_act_prompt(ctx: &DialogContext, state: &BeliefState) -> Prompt {
    let mut text = serialize_state_prompt(ctx).text;
    text.push(' ');
    text.push_str(BELIEF_TOKEN);
    let verbalized = verbalize_state(state);
    if !verbalized.is_empty() {
        text.push(' ');
        text.push_str(&verbalized);
    }
    Prompt {
        text,
        stage: SubgoalKind::ActResponse,
    }
}

/// The state-prompt part of an act/response prompt (everything before `[B]`).
pub fn state_prompt_prefix(prompt: &str) -> &str {
    match prompt.find(BELIEF_TOKEN) {
        Some(i) => prompt[..i].trim_end(),
        None => prompt,
    }
}
