//! Deterministic stand-in for a trained model.
//!
//! The scripted backend recognises prompts built from a known corpus and
//! answers with the ground-truth turn. Greedy generations are exact; sampled
//! generations carry harmless surface variation (value casing in states, an
//! opening phrase in responses) so that every slot yields a distinct but still
//! correct candidate. Errors are planted at chosen sites or drawn at a fixed
//! rate, and only ever touch sampled slots unless an injection names slot 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::prompt::{serialize_state_prompt, state_prompt_prefix, BELIEF_TOKEN};
use super::verbalize::{verbalize_act_response, verbalize_state};
use super::{CompletionRequest, GeneratorBackend};
use crate::corpus::Corpus;
use crate::db::Database;
use crate::error::BackendError;
use crate::model::{
    normalize_value, placeholder, BeliefState, Dialog, DialogAct, SubgoalKind, UserGoal, DONTCARE,
};
use crate::seed;

const OPENERS: [&str; 8] = [
    "sure.",
    "okay.",
    "certainly.",
    "of course.",
    "alright.",
    "great.",
    "no problem.",
    "happy to help.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorKind {
    DropSlot,
    WrongValue,
    SwapDepartureDestination,
    OmitRequestedSlotInResponse,
}

impl ErrorKind {
    pub fn stage(self) -> SubgoalKind {
        match self {
            ErrorKind::OmitRequestedSlotInResponse => SubgoalKind::ActResponse,
            _ => SubgoalKind::State,
        }
    }
}

fn first_sample() -> usize {
    1
}

/// An error planted at one generation site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub dialog_id: String,
    pub turn: usize,
    pub kind: ErrorKind,
    /// Generation slot to corrupt: 0 is greedy, 1..=k the sampled ones.
    #[serde(default = "first_sample")]
    pub sample: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
}

impl Injection {
    pub fn new(dialog_id: &str, turn: usize, kind: ErrorKind) -> Self {
        Injection {
            dialog_id: dialog_id.to_string(),
            turn,
            kind,
            sample: 1,
            domain: None,
            slot: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjectionConfig {
    #[serde(default)]
    pub injections: Vec<Injection>,
    /// Probability of a random error on each sampled generation.
    #[serde(default)]
    pub random_rate: f64,
}

pub struct ScriptedBackend {
    sites: HashMap<String, (usize, usize)>,
    dialogs: Vec<Dialog>,
    goals: Vec<UserGoal>,
    db: Database,
    injections: HashMap<(String, usize, SubgoalKind), Vec<Injection>>,
    random_rate: f64,
    seed: u64,
}

impl ScriptedBackend {
    pub fn new(world: &Corpus, noise: ErrorInjectionConfig, seed: u64) -> Self {
        let mut dialogs: Vec<Dialog> = world.dialogs.clone();
        dialogs.sort_by(|a, b| a.id.cmp(&b.id));
        let goals = dialogs
            .iter()
            .map(|d| world.goals.get(&d.goal_id).cloned().unwrap_or_default())
            .collect();
        let mut sites = HashMap::new();
        for (di, d) in dialogs.iter().enumerate() {
            for ctx in d.contexts() {
                sites
                    .entry(serialize_state_prompt(&ctx).text)
                    .or_insert((di, ctx.turn_index));
            }
        }
        let mut injections: HashMap<_, Vec<Injection>> = HashMap::new();
        for inj in noise.injections {
            injections
                .entry((inj.dialog_id.clone(), inj.turn, inj.kind.stage()))
                .or_default()
                .push(inj);
        }
        ScriptedBackend {
            sites,
            dialogs,
            goals,
            db: world.db.clone(),
            injections,
            random_rate: noise.random_rate,
            seed,
        }
    }

    fn planted(&self, dialog: &Dialog, turn: usize, stage: SubgoalKind, slot: usize) -> Vec<&Injection> {
        self.injections
            .get(&(dialog.id.clone(), turn, stage))
            .map(|v| v.iter().filter(|i| i.sample == slot).collect())
            .unwrap_or_default()
    }

    fn random_draw(&self, dialog: &Dialog, turn: usize, stage: SubgoalKind, slot: usize) -> Option<u64> {
        if slot == 0 || self.random_rate <= 0.0 {
            return None;
        }
        let parts = [dialog.id.as_str(), &turn.to_string(), stage.as_str(), &slot.to_string()];
        (seed::unit(self.seed, &parts) < self.random_rate).then(|| seed::derive(self.seed ^ 0x5eed, &parts))
    }

    fn generate_state(&self, di: usize, turn: usize, slot: usize) -> String {
        let dialog = &self.dialogs[di];
        let goal = &self.goals[di];
        let gt = &dialog.turns[turn].system;
        let mut state = gt.state.clone();
        if slot > 0 {
            vary_case(&mut state, slot);
        }
        for inj in self.planted(dialog, turn, SubgoalKind::State, slot) {
            self.corrupt_state(&mut state, inj.kind, inj.domain.as_deref(), inj.slot.as_deref(), &gt.response, goal);
        }
        if let Some(draw) = self.random_draw(dialog, turn, SubgoalKind::State, slot) {
            let mut kinds = vec![ErrorKind::WrongValue, ErrorKind::DropSlot];
            if state.get("train", "departure").is_some() && state.get("train", "destination").is_some() {
                kinds.push(ErrorKind::SwapDepartureDestination);
            }
            if !state.is_empty() {
                let kind = kinds[(draw % kinds.len() as u64) as usize];
                self.corrupt_state(&mut state, kind, None, None, &gt.response, goal);
            }
        }
        verbalize_state(&state)
    }

    fn generate_act_response(&self, di: usize, turn: usize, slot: usize, request_seed: u64) -> String {
        let dialog = &self.dialogs[di];
        let goal = &self.goals[di];
        let gt = &dialog.turns[turn].system;
        let mut acts = gt.acts.clone();
        let mut response = gt.response.clone();
        if slot > 0 {
            let opener = OPENERS[((request_seed as usize % OPENERS.len()) + slot - 1) % OPENERS.len()];
            response = format!("{opener} {response}");
        }
        for inj in self.planted(dialog, turn, SubgoalKind::ActResponse, slot) {
            omit_requested(&mut acts, &mut response, inj.domain.as_deref(), inj.slot.as_deref(), goal);
        }
        if self.random_draw(dialog, turn, SubgoalKind::ActResponse, slot).is_some() {
            omit_requested(&mut acts, &mut response, None, None, goal);
        }
        verbalize_act_response(&acts, &response)
    }

    /// Domain a state error targets: the requested one, else a goal domain
    /// offered in this turn's response, else the first non-empty domain.
    fn target_domain(&self, state: &BeliefState, wanted: Option<&str>, response: &str, goal: &UserGoal) -> Option<String> {
        if let Some(d) = wanted {
            return Some(d.to_string());
        }
        let ontology = self.db.ontology();
        let offered = goal.domains.keys().find(|d| {
            state.domain(d.as_str()).is_some_and(|s| !s.is_empty())
                && ontology
                    .schema(d.as_str())
                    .is_ok_and(|s| response.contains(&placeholder(d.as_str(), &s.key)))
        });
        offered
            .map(|d| d.to_string())
            .or_else(|| state.domains.iter().find(|(_, s)| !s.is_empty()).map(|(d, _)| d.to_string()))
    }

    fn corrupt_state(
        &self,
        state: &mut BeliefState,
        kind: ErrorKind,
        domain: Option<&str>,
        slot: Option<&str>,
        response: &str,
        goal: &UserGoal,
    ) {
        if kind == ErrorKind::SwapDepartureDestination {
            let d = domain.unwrap_or("train");
            if let Some(slots) = state.domains.get_mut(d) {
                if let (Some(dep), Some(dest)) = (slots.get("departure").cloned(), slots.get("destination").cloned()) {
                    slots.insert("departure".into(), dest);
                    slots.insert("destination".into(), dep);
                }
            }
            return;
        }
        let Some(d) = self.target_domain(state, domain, response, goal) else {
            return;
        };
        let Some(slots) = state.domains.get_mut(d.as_str()) else {
            return;
        };
        let target = match slot {
            Some(s) => Some(s.to_string()),
            None => slots
                .iter()
                .find(|(_, v)| normalize_value(v) != DONTCARE)
                .or_else(|| slots.iter().next())
                .map(|(s, _)| s.clone()),
        };
        let Some(target) = target else {
            return;
        };
        match kind {
            ErrorKind::DropSlot => {
                slots.remove(&target);
                if slots.is_empty() {
                    state.domains.remove(d.as_str());
                }
            }
            ErrorKind::WrongValue => {
                let current = slots.get(&target).map(|v| normalize_value(v));
                let goal_value = goal
                    .domain(&d)
                    .and_then(|g| g.constraints.get(&target))
                    .map(|v| normalize_value(v));
                let differs = |v: &str| {
                    let v = normalize_value(v);
                    Some(&v) != current.as_ref() && Some(&v) != goal_value.as_ref() && v != DONTCARE
                };
                let replacement = self
                    .db
                    .table(&d)
                    .ok()
                    .and_then(|rows| rows.iter().filter_map(|e| e.get(&target)).find(|v| differs(v)).cloned())
                    .unwrap_or_else(|| {
                        ["unknown", "other"].into_iter().find(|v| differs(v)).unwrap_or("none").to_string()
                    });
                slots.insert(target, replacement);
            }
            ErrorKind::SwapDepartureDestination | ErrorKind::OmitRequestedSlotInResponse => {}
        }
    }
}

/// Title-cases or uppercases one value so each sampled slot differs from the
/// greedy state while normalizing to the same value.
fn vary_case(state: &mut BeliefState, slot: usize) {
    let keys: Vec<(String, String)> = state
        .domains
        .iter()
        .flat_map(|(d, s)| {
            s.iter()
                .filter(|(_, v)| v.chars().any(char::is_alphabetic))
                .map(move |(k, _)| (d.to_string(), k.clone()))
        })
        .collect();
    if keys.is_empty() {
        return;
    }
    let (d, k) = &keys[(slot - 1) % keys.len()];
    let upper = ((slot - 1) / keys.len()) % 2 == 1;
    if let Some(v) = state.domains.get_mut(d.as_str()).and_then(|s| s.get_mut(k)) {
        *v = if upper {
            v.to_uppercase()
        } else {
            let mut chars = v.chars();
            chars
                .next()
                .map(|c| c.to_uppercase().chain(chars).collect())
                .unwrap_or_default()
        };
    }
}

/// Drops a requested slot's placeholder (and its inform acts) from a response.
fn omit_requested(
    acts: &mut Vec<DialogAct>,
    response: &mut String,
    domain: Option<&str>,
    slot: Option<&str>,
    goal: &UserGoal,
) {
    let candidates: Vec<(String, String)> = match (domain, slot) {
        (Some(d), Some(s)) => vec![(d.to_string(), s.to_string())],
        _ => goal
            .domains
            .iter()
            .filter(|(d, _)| domain.is_none_or(|want| want == d.as_str()))
            .flat_map(|(d, g)| g.requests.iter().map(move |s| (d.to_string(), s.clone())))
            .filter(|(_, s)| slot.is_none_or(|want| want == s.as_str()))
            .collect(),
    };
    let Some((d, s)) = candidates
        .into_iter()
        .find(|(d, s)| response.contains(&placeholder(d, s)))
    else {
        return;
    };
    let stripped = response.replace(&placeholder(&d, &s), "");
    *response = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    acts.retain(|a| {
        !(a.slot.as_deref() == Some(s.as_str()) && a.domain.as_str().split(' ').any(|p| p == d))
    });
}

impl GeneratorBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let (stage, key) = if request.prompt.contains(BELIEF_TOKEN) {
            (SubgoalKind::ActResponse, state_prompt_prefix(&request.prompt))
        } else {
            (SubgoalKind::State, request.prompt.as_str())
        };
        let &(di, turn) = self
            .sites
            .get(key)
            .ok_or_else(|| BackendError::Unavailable(format!("unknown context {key:?}")))?;
        Ok((0..request.n)
            .map(|i| {
                let slot = if request.greedy { 0 } else { i + 1 };
                match stage {
                    SubgoalKind::State => self.generate_state(di, turn, slot),
                    SubgoalKind::ActResponse => self.generate_act_response(di, turn, slot, request.seed),
                }
            })
            .collect())
    }
}
