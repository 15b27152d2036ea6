//! Candidate assembly, success labeling, subgoal detection by single-turn
//! replacement, and SFT / preference record emission.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::db::Database;
use crate::error::{EvalError, PipelineError};
use crate::eval::dialog_success;
use crate::generator::{
    serialize_act_prompt, serialize_state_prompt, verbalize_act_response, verbalize_state,
    SampledTurnSet,
};
use crate::model::{Dialog, DialogContext, Fragment, SubgoalKind, SystemTurn, Turn, UserGoal};

/// Id of candidate `index` (0 is the all-greedy dialog) built from `source`.
pub fn candidate_id(source: &str, index: usize) -> String {
    format!("{source}#{index:03}")
}

/// Builds the all-greedy dialog plus `k * k` sampled dialogs from per-turn
/// samples, dropping exact duplicates.
///
/// Sampled dialog `j` (1-based) uses sampled state slot `(j - 1) / k` and
/// continuation slot `(j - 1) % k` at every turn.
pub fn assemble_candidates(
    source: &Dialog,
    samples: &[SampledTurnSet],
    k: usize,
) -> Result<Vec<Dialog>, PipelineError> {
    if samples.len() != source.turns.len() {
        return Err(PipelineError::IncompleteSamples {
            dialog: source.id.clone(),
            turn: samples.len().min(source.turns.len()),
        });
    }
    if let Some(t) = samples.iter().position(|s| !s.is_complete()) {
        return Err(PipelineError::IncompleteSamples {
            dialog: source.id.clone(),
            turn: t,
        });
    }
    let k = k.max(1);
    let mut out: Vec<Dialog> = Vec::with_capacity(k * k + 1);
    for j in 0..=k * k {
        let turns: Vec<Turn> = source
            .turns
            .iter()
            .zip(samples)
            .map(|(turn, set)| {
                let pick = if j == 0 {
                    set.greedy_pick()
                } else {
                    set.sampled_pick((j - 1) / k, (j - 1) % k)
                };
                Turn {
                    user: turn.user.clone(),
                    system: set.system_turn(pick),
                }
            })
            .collect();
        if out.iter().any(|d| d.turns == turns) {
            continue;
        }
        out.push(Dialog {
            id: candidate_id(&source.id, j),
            goal_id: source.goal_id.clone(),
            turns,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub dialog: Dialog,
    pub success: bool,
}

/// All candidates sampled for one user goal, with success labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGroup {
    pub goal_id: String,
    pub goal: UserGoal,
    pub source: Dialog,
    pub candidates: Vec<Candidate>,
}

impl CandidateGroup {
    pub fn n_successful(&self) -> usize {
        self.candidates.iter().filter(|c| c.success).count()
    }

    pub fn n_unsuccessful(&self) -> usize {
        self.candidates.len() - self.n_successful()
    }
}

pub fn label_success(
    source: &Dialog,
    goal: &UserGoal,
    dialogs: Vec<Dialog>,
    db: &Database,
) -> Result<CandidateGroup, EvalError> {
    let mut candidates = dialogs
        .into_iter()
        .map(|dialog| {
            let success = dialog_success(&dialog, goal, db)?;
            Ok(Candidate { dialog, success })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    candidates.sort_by(|a, b| a.dialog.id.cmp(&b.dialog.id));
    Ok(CandidateGroup {
        goal_id: source.goal_id.clone(),
        goal: goal.clone(),
        source: source.clone(),
        candidates,
    })
}

/// A replacement fragment that turned a successful dialog unsuccessful.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Negative {
    pub dialog_id: String,
    pub fragment: Fragment,
}

/// A turn-level generation whose replacement breaks dialog success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalSample {
    pub goal_id: String,
    pub dialog_id: String,
    pub turn: usize,
    pub kind: SubgoalKind,
    pub context: DialogContext,
    /// The full successful turn; `kind` selects the part that is the subgoal.
    pub positive: SystemTurn,
    pub negatives: Vec<Negative>,
}

impl SubgoalSample {
    fn sort_key(&self) -> (&str, &str, usize, SubgoalKind) {
        (&self.goal_id, &self.dialog_id, self.turn, self.kind)
    }
}

/// Finds the subgoals of every successful candidate.
///
/// For each successful dialog, turn and kind, the matching fragment of every
/// unsuccessful candidate (in id order) is swapped in, one replacement at a
/// time. Fragments that make the dialog fail are kept as negatives, and a
/// sample is emitted when at least one exists. Groups without an unsuccessful
/// candidate yield nothing.
pub fn detect_subgoals(group: &CandidateGroup, db: &Database) -> Result<Vec<SubgoalSample>, EvalError> {
    let (winners, losers): (Vec<&Dialog>, Vec<&Dialog>) = {
        let mut w = Vec::new();
        let mut l = Vec::new();
        for c in &group.candidates {
            if c.success {
                w.push(&c.dialog);
            } else {
                l.push(&c.dialog);
            }
        }
        (w, l)
    };
    if losers.is_empty() {
        return Ok(Vec::new());
    }

    let mut out = Vec::new();
    for winner in winners {
        for (t, turn) in winner.turns.iter().enumerate() {
            for kind in SubgoalKind::ALL {
                let mut negatives = Vec::new();
                for loser in &losers {
                    let Some(other) = loser.turns.get(t) else {
                        continue;
                    };
                    if turn.system.same_fragment(&other.system, kind) {
                        continue;
                    }
                    let replaced = winner
                        .replace_turn(t, kind, &other.system)
                        .expect("turn index checked above");
                    if !dialog_success(&replaced, &group.goal, db)? {
                        negatives.push(Negative {
                            dialog_id: loser.id.clone(),
                            fragment: other.system.fragment(kind),
                        });
                    }
                }
                if !negatives.is_empty() {
                    out.push(SubgoalSample {
                        goal_id: group.goal_id.clone(),
                        dialog_id: winner.id.clone(),
                        turn: t,
                        kind,
                        context: winner.context_at(t),
                        positive: turn.system.clone(),
                        negatives,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub prompt: String,
    pub target: String,
    pub kind: SubgoalKind,
    pub goal_id: String,
    pub dialog_id: String,
    pub turn: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub kind: SubgoalKind,
    pub goal_id: String,
    pub dialog_id: String,
    pub turn: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairPolicy {
    /// One pair per subgoal, with the first flipping negative.
    #[default]
    First,
    /// One pair per distinct negative.
    All,
}

fn prompt_for(sample: &SubgoalSample) -> String {
    match sample.kind {
        SubgoalKind::State => serialize_state_prompt(&sample.context).text,
        SubgoalKind::ActResponse => serialize_act_prompt(&sample.context, &sample.positive.state).text,
    }
}

/// Training target text of a fragment: `[B] <state>` or `[A] <acts> [R] <response>`.
pub fn target_text(fragment: &Fragment) -> String {
    match fragment {
        Fragment::State { state } => {
            let v = verbalize_state(state);
            if v.is_empty() {
                "[B]".to_string()
            } else {
                format!("[B] {v}")
            }
        }
        Fragment::ActResponse { acts, response } => verbalize_act_response(acts, response),
    }
}

fn sorted(samples: &[SubgoalSample]) -> Vec<&SubgoalSample> {
    let mut v: Vec<&SubgoalSample> = samples.iter().collect();
    v.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    v
}

pub fn emit_sft(samples: &[SubgoalSample]) -> Vec<SftRecord> {
    sorted(samples)
        .into_iter()
        .map(|s| SftRecord {
            prompt: prompt_for(s),
            target: target_text(&s.positive.fragment(s.kind)),
            kind: s.kind,
            goal_id: s.goal_id.clone(),
            dialog_id: s.dialog_id.clone(),
            turn: s.turn,
        })
        .collect()
}

pub fn emit_dpo(samples: &[SubgoalSample], policy: PairPolicy) -> Vec<PreferenceRecord> {
    let mut out: Vec<PreferenceRecord> = Vec::new();
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for s in sorted(samples) {
        let prompt = prompt_for(s);
        let chosen = target_text(&s.positive.fragment(s.kind));
        let rejected = s
            .negatives
            .iter()
            .map(|n| target_text(&n.fragment))
            .filter(|r| *r != chosen);
        let rejected: Vec<String> = match policy {
            PairPolicy::First => rejected.take(1).collect(),
            PairPolicy::All => rejected.collect(),
        };
        for r in rejected {
            if policy == PairPolicy::All && !seen.insert((prompt.clone(), chosen.clone(), r.clone())) {
                continue;
            }
            out.push(PreferenceRecord {
                prompt: prompt.clone(),
                chosen: chosen.clone(),
                rejected: r,
                kind: s.kind,
                goal_id: s.goal_id.clone(),
                dialog_id: s.dialog_id.clone(),
                turn: s.turn,
            });
        }
    }
    out
}
