//! Domain types for goals, dialogs, belief states, acts and responses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Reserved wildcard value in constraints and belief states.
pub const DONTCARE: &str = "dontcare";

/// A lowercase domain identifier such as `hotel` or `train`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(String);

impl DomainId {
    pub fn new(name: impl Into<String>) -> Self {
        DomainId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DomainId {
    fn from(s: &str) -> Self {
        DomainId(s.to_string())
    }
}

impl std::borrow::Borrow<str> for DomainId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Lowercases and collapses whitespace runs; the canonical form used for
/// every slot-value comparison.
pub fn normalize_value(value: &str) -> String {
    value
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn values_match(a: &str, b: &str) -> bool {
    normalize_value(a) == normalize_value(b)
}

/// Canonical delexicalized placeholder, e.g. `[hotel_address]`.
pub fn placeholder(domain: &str, slot: &str) -> String {
    format!("[{domain}_{slot}]")
}

/// The per-domain part of a user goal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalDomain {
    #[serde(default)]
    pub constraints: BTreeMap<String, String>,
    #[serde(default)]
    pub requests: BTreeSet<String>,
}

/// Informable constraints and requestable slots for every domain the user
/// cares about.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserGoal {
    pub domains: BTreeMap<DomainId, GoalDomain>,
}

impl UserGoal {
    pub fn domain(&self, domain: &str) -> Option<&GoalDomain> {
        self.domains.get(domain)
    }
}

/// Belief state: domain -> slot -> value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState {
    pub domains: BTreeMap<DomainId, BTreeMap<String, String>>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.values().all(BTreeMap::is_empty)
    }

    pub fn insert(&mut self, domain: &str, slot: &str, value: &str) {
        self.domains
            .entry(DomainId::new(domain))
            .or_default()
            .insert(slot.to_string(), value.to_string());
    }

    pub fn domain(&self, domain: &str) -> Option<&BTreeMap<String, String>> {
        self.domains.get(domain)
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&str> {
        self.domains.get(domain)?.get(slot).map(String::as_str)
    }
}

/// One system dialog act, e.g. `hotel inform NAME`.
///
/// `domain` is the domain prefix as verbalized. Booking acts carry a
/// compound prefix such as `booking hotel`; each space-separated component
/// is an ontology domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogAct {
    pub domain: DomainId,
    pub act: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
}

impl DialogAct {
    pub fn new(domain: &str, act: &str, slot: Option<&str>) -> Self {
        DialogAct {
            domain: DomainId::new(domain),
            act: act.to_string(),
            slot: slot.map(str::to_string),
        }
    }
}

/// The system side of a turn: belief state, acts and delexicalized response.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemTurn {
    #[serde(default)]
    pub state: BeliefState,
    #[serde(default)]
    pub acts: Vec<DialogAct>,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub user: String,
    pub system: SystemTurn,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dialog {
    pub id: String,
    pub goal_id: String,
    pub turns: Vec<Turn>,
}

/// Which part of a system turn a replacement or training sample targets.
/// States are replaced on their own; acts and responses always together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgoalKind {
    State,
    ActResponse,
}

impl SubgoalKind {
    pub const ALL: [SubgoalKind; 2] = [SubgoalKind::State, SubgoalKind::ActResponse];

    pub fn as_str(self) -> &'static str {
        match self {
            SubgoalKind::State => "state",
            SubgoalKind::ActResponse => "act_response",
        }
    }
}

impl fmt::Display for SubgoalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A system turn projected onto one [`SubgoalKind`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fragment {
    State { state: BeliefState },
    ActResponse { acts: Vec<DialogAct>, response: String },
}

impl SystemTurn {
    pub fn fragment(&self, kind: SubgoalKind) -> Fragment {
        match kind {
            SubgoalKind::State => Fragment::State {
                state: self.state.clone(),
            },
            SubgoalKind::ActResponse => Fragment::ActResponse {
                acts: self.acts.clone(),
                response: self.response.clone(),
            },
        }
    }

    /// True when `self` and `other` agree on the part selected by `kind`.
    pub fn same_fragment(&self, other: &SystemTurn, kind: SubgoalKind) -> bool {
        match kind {
            SubgoalKind::State => self.state == other.state,
            SubgoalKind::ActResponse => self.acts == other.acts && self.response == other.response,
        }
    }
}

/// The input for predicting turn `turn_index`: all earlier turns plus the
/// current user utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogContext {
    pub goal_id: String,
    pub dialog_id: String,
    pub turn_index: usize,
    pub history: Vec<Turn>,
    pub user: String,
}

impl Dialog {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// One context per turn; context `t` holds the first `t` turns.
    pub fn contexts(&self) -> Vec<DialogContext> {
        (0..self.turns.len()).map(|t| self.context_at(t)).collect()
    }

    pub fn context_at(&self, t: usize) -> DialogContext {
        DialogContext {
            goal_id: self.goal_id.clone(),
            dialog_id: self.id.clone(),
            turn_index: t,
            history: self.turns[..t].to_vec(),
            user: self.turns[t].user.clone(),
        }
    }

    /// Returns a copy with one part of turn `t` taken from `src`.
    pub fn replace_turn(
        &self,
        t: usize,
        kind: SubgoalKind,
        src: &SystemTurn,
    ) -> Result<Dialog, ModelError> {
        if t >= self.turns.len() {
            return Err(ModelError::TurnOutOfRange {
                index: t,
                len: self.turns.len(),
            });
        }
        let mut out = self.clone();
        let system = &mut out.turns[t].system;
        match kind {
            SubgoalKind::State => system.state = src.state.clone(),
            SubgoalKind::ActResponse => {
                system.acts = src.acts.clone();
                system.response = src.response.clone();
            }
        }
        Ok(out)
    }

    pub fn responses(&self) -> impl Iterator<Item = &str> {
        self.turns.iter().map(|t| t.system.response.as_str())
    }
}

pub fn contexts_of(dialog: &Dialog) -> Vec<DialogContext> {
    dialog.contexts()
}

pub fn replace_turn(
    dialog: &Dialog,
    t: usize,
    kind: SubgoalKind,
    src: &SystemTurn,
) -> Result<Dialog, ModelError> {
    dialog.replace_turn(t, kind, src)
}

/// Extracts every `[domain_slot]` placeholder in a response, in order.
/// Returns the raw bracketed token contents, e.g. `hotel_name`.
pub fn placeholders(response: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = response;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        match after.find(']') {
            Some(close) => {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn turn(user: &str, response: &str) -> Turn {
        Turn {
            user: user.into(),
            system: SystemTurn {
                state: BeliefState::new(),
                acts: vec![],
                response: response.into(),
            },
        }
    }

    fn dialog(n: usize) -> Dialog {
        Dialog {
            id: "d".into(),
            goal_id: "g".into(),
            turns: (0..n)
                .map(|i| turn(&format!("u{i}"), &format!("r{i}")))
                .collect(),
        }
    }

    #[test]
    fn single_turn_has_one_empty_context() {
        let ctx = dialog(1).contexts();
        assert_eq!(ctx.len(), 1);
        assert!(ctx[0].history.is_empty());
        assert_eq!(ctx[0].user, "u0");
    }

    #[test]
    fn four_turn_contexts_have_growing_history() {
        let d = dialog(4);
        let lens: Vec<_> = d.contexts().iter().map(|c| c.history.len()).collect();
        assert_eq!(lens, vec![0, 1, 2, 3]);
    }

    #[test]
    fn replace_out_of_range() {
        let d = dialog(2);
        let err = d
            .replace_turn(2, SubgoalKind::State, &d.turns[0].system)
            .unwrap_err();
        assert!(matches!(err, ModelError::TurnOutOfRange { index: 2, len: 2 }));
    }

    #[test]
    fn identity_replacement() {
        let mut d = dialog(3);
        d.turns[1].system.state.insert("hotel", "area", "north");
        for kind in SubgoalKind::ALL {
            let src = d.turns[1].system.clone();
            assert_eq!(d.replace_turn(1, kind, &src).unwrap(), d);
        }
    }

    #[test]
    fn act_response_replaced_jointly_state_kept() {
        let mut d = dialog(2);
        d.turns[0].system.state.insert("hotel", "area", "north");
        let src = SystemTurn {
            state: BeliefState::new(),
            acts: vec![DialogAct::new("hotel", "inform", Some("name"))],
            response: "[hotel_name] it is".into(),
        };
        let out = d.replace_turn(0, SubgoalKind::ActResponse, &src).unwrap();
        assert_eq!(out.turns[0].system.state, d.turns[0].system.state);
        assert_eq!(out.turns[0].system.acts, src.acts);
        assert_eq!(out.turns[0].system.response, src.response);
        assert_eq!(out.turns[1], d.turns[1]);
    }

    #[test]
    fn normalization() {
        assert!(values_match("  North ", "north"));
        assert!(values_match("london  liverpool street", "London Liverpool Street"));
        assert!(!values_match("north", "south"));
    }

    #[test]
    fn placeholder_scan() {
        assert_eq!(
            placeholders("[hotel_name] is [hotel_price]. ok [broken"),
            vec!["hotel_name", "hotel_price"]
        );
    }
}
