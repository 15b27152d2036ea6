//! Text forms of belief states and dialog acts, and lenient parsers for
//! model generations.
//!
//! States verbalize as `train departure: london liverpool street; destination: cambridge;`
//! (domain written once, then its slots), acts as
//! `booking hotel inform NAME; inform PRICE;` (domain prefix sticky across clauses,
//! slot names uppercased). An act/response generation reads `[A] <acts> [R] <response>`.

use crate::model::{BeliefState, DialogAct};

pub const ACT_TOKEN: &str = "[A]";
pub const RESPONSE_TOKEN: &str = "[R]";

pub fn verbalize_state(state: &BeliefState) -> String {
    let mut clauses = Vec::new();
    for (domain, slots) in &state.domains {
        for (i, (slot, value)) in slots.iter().enumerate() {
            if i == 0 {
                clauses.push(format!("{domain} {slot}: {value};"));
            } else {
                clauses.push(format!("{slot}: {value};"));
            }
        }
    }
    clauses.join(" ")
}

/// Parses a verbalized state. Malformed clauses are skipped and described
/// in the returned diagnostics; parsing never fails.
pub fn parse_state(text: &str) -> (BeliefState, Vec<String>) {
    let mut state = BeliefState::new();
    let mut diagnostics = Vec::new();
    let mut domain: Option<String> = None;

    for raw in text.split(';') {
        let clause = raw.trim();
        if clause.is_empty() {
            continue;
        }
        let Some((key, value)) = clause.split_once(':') else {
            diagnostics.push(format!("state clause without ':' skipped: {clause:?}"));
            continue;
        };
        let value = value.trim();
        if value.is_empty() {
            diagnostics.push(format!("state clause with empty value skipped: {clause:?}"));
            continue;
        }
        let words: Vec<&str> = key.split_whitespace().collect();
        let slot = match words.as_slice() {
            [d, s] => {
                domain = Some(d.to_string());
                *s
            }
            [s] => *s,
            _ => {
                diagnostics.push(format!("malformed state clause skipped: {clause:?}"));
                continue;
            }
        };
        let Some(d) = domain.as_deref() else {
            diagnostics.push(format!("state clause without domain skipped: {clause:?}"));
            continue;
        };
        if state.get(d, slot).is_some() {
            diagnostics.push(format!("duplicate slot {d} {slot}; last value kept"));
        }
        state.insert(d, slot, value);
    }
    (state, diagnostics)
}

pub fn verbalize_acts(acts: &[DialogAct]) -> String {
    let mut clauses = Vec::with_capacity(acts.len());
    let mut current: Option<&str> = None;
    for act in acts {
        let mut clause = String::new();
        if current != Some(act.domain.as_str()) {
            clause.push_str(act.domain.as_str());
            clause.push(' ');
            current = Some(act.domain.as_str());
        }
        clause.push_str(&act.act);
        if let Some(slot) = &act.slot {
            clause.push(' ');
            clause.push_str(&slot.to_uppercase());
        }
        clause.push(';');
        clauses.push(clause);
    }
    clauses.join(" ")
}

fn is_slot_token(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_uppercase()) && !token.chars().any(|c| c.is_lowercase())
}

pub fn parse_acts(text: &str) -> (Vec<DialogAct>, Vec<String>) {
    let mut acts = Vec::new();
    let mut diagnostics = Vec::new();
    let mut domain: Option<String> = None;

    for raw in text.split(';') {
        let clause = raw.trim();
        if clause.is_empty() {
            continue;
        }
        let mut words: Vec<&str> = clause.split_whitespace().collect();
        let slot = match words.last() {
            Some(last) if is_slot_token(last) => {
                let s = last.to_lowercase();
                words.pop();
                Some(s)
            }
            _ => None,
        };
        let Some(verb) = words.pop() else {
            diagnostics.push(format!("act clause without verb skipped: {clause:?}"));
            continue;
        };
        if !words.is_empty() {
            domain = Some(words.join(" "));
        }
        let Some(d) = domain.as_deref() else {
            diagnostics.push(format!("act clause without domain skipped: {clause:?}"));
            continue;
        };
        acts.push(DialogAct::new(d, verb, slot.as_deref()));
    }
    (acts, diagnostics)
}

/// `[A] <acts> [R] <response>`
pub fn verbalize_act_response(acts: &[DialogAct], response: &str) -> String {
    let acts = verbalize_acts(acts);
    let mut out = String::from(ACT_TOKEN);
    if !acts.is_empty() {
        out.push(' ');
        out.push_str(&acts);
    }
    out.push(' ');
    out.push_str(RESPONSE_TOKEN);
    let response = response.trim();
    if !response.is_empty() {
        out.push(' ');
        out.push_str(response);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedActResponse {
    pub acts: Vec<DialogAct>,
    pub response: String,
    pub diagnostics: Vec<String>,
}

/// Splits a generation at `[R]`. Without both markers in order the whole
/// text becomes the response and no acts are returned.
pub fn parse_act_response(text: &str) -> ParsedActResponse {
    let split = text.find(ACT_TOKEN).and_then(|a| {
        let after = a + ACT_TOKEN.len();
        text[after..].find(RESPONSE_TOKEN).map(|r| (a, after, after + r))
    });
    match split {
        Some((a, acts_start, r)) => {
            let mut diagnostics = Vec::new();
            if !text[..a].trim().is_empty() {
                diagnostics.push(format!("text before [A] ignored: {:?}", text[..a].trim()));
            }
            let (acts, mut act_diags) = parse_acts(&text[acts_start..r]);
            diagnostics.append(&mut act_diags);
            ParsedActResponse {
                acts,
                response: text[r + RESPONSE_TOKEN.len()..].trim().to_string(),
                diagnostics,
            }
        }
        None => ParsedActResponse {
            acts: Vec::new(),
            response: text.trim().to_string(),
            diagnostics: vec!["generation lacks [A] ... [R] markers; treated as bare response".into()],
        },
    }
}
