//! Dialog-level INFORM / SUCCESS evaluation, COMBINED score and corpus reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bleu::corpus_bleu;
use crate::db::Database;
use crate::error::EvalError;
use crate::model::{placeholder, Dialog, DomainId, UserGoal};

/// Domain columns of the per-domain breakdown, in display order.
pub const REPORT_DOMAINS: [&str; 5] = ["train", "attraction", "restaurant", "taxi", "hotel"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainOutcome {
    pub domain: DomainId,
    pub inform: bool,
    pub success: bool,
    /// Key values (names, or train ids) of the entities matched at the last offer turn.
    pub offered: Vec<String>,
}

/// Evaluates one goal domain of a dialog.
///
/// An offer turn is a system response containing the domain's key placeholder
/// (`[hotel_name]`, `[train_id]`). The belief state at the last offer turn is
/// matched against the database; INFORM holds when that match set is non-empty
/// and shares an entity with the goal's constraint match set. SUCCESS
/// additionally needs every requested slot's placeholder in some response.
/// Domains without a table always satisfy INFORM.
pub fn domain_outcome(
    dialog: &Dialog,
    goal: &UserGoal,
    db: &Database,
    domain: &str,
) -> Result<DomainOutcome, EvalError> {
    let entry = goal
        .domain(domain)
        .ok_or_else(|| EvalError::NotInGoal(domain.to_string()))?;
    let schema = db.ontology().schema(domain)?;

    let mut offered = Vec::new();
    let inform = if !schema.entity_bearing {
        true
    } else {
        let key_token = placeholder(domain, &schema.key);
        let last_offer = dialog
            .turns
            .iter()
            .rposition(|t| t.system.response.contains(&key_token));
        match last_offer {
            None => entry.constraints.is_empty(),
            Some(t) => {
                let belief: BTreeMap<String, String> = dialog.turns[t]
                    .system
                    .state
                    .domain(domain)
                    .into_iter()
                    .flatten()
                    .filter(|(slot, value)| schema.is_informable(slot) && !value.trim().is_empty())
                    .map(|(s, v)| (s.clone(), v.clone()))
                    .collect();
                let offered_rows = db.query_indices(domain, &belief)?;
                let goal_rows: BTreeSet<usize> =
                    db.query_indices(domain, &entry.constraints)?.into_iter().collect();
                offered = offered_rows
                    .iter()
                    .filter_map(|&i| db.entity_key(domain, i).map(str::to_string))
                    .collect();
                offered_rows.iter().any(|i| goal_rows.contains(i))
            }
        }
    };

    let success = inform
        && entry.requests.iter().all(|slot| {
            let token = placeholder(domain, slot);
            dialog.responses().any(|r| r.contains(&token))
        });

    Ok(DomainOutcome {
        domain: DomainId::new(domain),
        inform,
        success,
        offered,
    })
}

pub fn goal_outcomes(
    dialog: &Dialog,
    goal: &UserGoal,
    db: &Database,
) -> Result<Vec<DomainOutcome>, EvalError> {
    goal.domains
        .keys()
        .map(|d| domain_outcome(dialog, goal, db, d.as_str()))
        .collect()
}

/// A dialog succeeds when every goal domain satisfies both INFORM and SUCCESS.
pub fn dialog_success(dialog: &Dialog, goal: &UserGoal, db: &Database) -> Result<bool, EvalError> {
    for domain in goal.domains.keys() {
        if !domain_outcome(dialog, goal, db, domain.as_str())?.success {
            return Ok(false);
        }
    }
    Ok(true)
}

/// BLEU + (INFORM + SUCCESS) / 2
pub fn combined(bleu: f64, inform_rate: f64, success_rate: f64) -> f64 {
    bleu + (inform_rate + success_rate) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainRates {
    pub inform: f64,
    pub success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu: f64,
    #[serde(rename = "inform")]
    pub inform_rate: f64,
    #[serde(rename = "success")]
    pub success_rate: f64,
    pub combined: f64,
    pub per_domain: BTreeMap<String, DomainRates>,
}

impl EvalReport {
    /// Fixed-width INFORM | SUCCESS table over the standard five domains.
    pub fn domain_table(&self) -> String {
        let mut out = String::new();
        let cell = |rates: Option<&DomainRates>, pick: fn(&DomainRates) -> f64| {
            rates.map_or_else(|| format!("{:>11}", "-"), |r| format!("{:>11.1}", pick(r)))
        };
        let _ = write!(out, "{:<8}", "");
        for _ in 0..2 {
            for d in REPORT_DOMAINS {
                let _ = write!(out, "{d:>11}");
            }
        }
        out.push('\n');
        let _ = write!(out, "{:<8}", "");
        let _ = write!(out, "{:>55}{:>55}", "INFORM", "SUCCESS");
        out.push('\n');
        let _ = write!(out, "{:<8}", "rate");
        for d in REPORT_DOMAINS {
            out.push_str(&cell(self.per_domain.get(d), |r| r.inform));
        }
        for d in REPORT_DOMAINS {
            out.push_str(&cell(self.per_domain.get(d), |r| r.success));
        }
        out.push('\n');
        out
    }
}

fn percent(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * hits as f64 / total as f64
    }
}

/// Aggregates INFORM / SUCCESS rates and response BLEU over a corpus.
///
/// `references` maps dialog ids to their reference responses, turn-aligned
/// with the predicted dialog. Dialogs are reduced in id order.
pub fn evaluate_corpus(
    dialogs: &[Dialog],
    goals: &BTreeMap<String, UserGoal>,
    db: &Database,
    references: &BTreeMap<String, Vec<String>>,
) -> Result<EvalReport, EvalError> {
    let mut ordered: Vec<&Dialog> = dialogs.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let outcomes: Vec<Vec<DomainOutcome>> = ordered
        .par_iter()
        .map(|d| {
            let goal = goals.get(&d.goal_id).ok_or_else(|| EvalError::MissingGoal {
                dialog: d.id.clone(),
                goal: d.goal_id.clone(),
            })?;
            goal_outcomes(d, goal, db)
        })
        .collect::<Result<_, _>>()?;

    let mut hypotheses = Vec::new();
    let mut refs = Vec::new();
    for d in &ordered {
        let reference = references
            .get(&d.id)
            .ok_or_else(|| EvalError::MissingReference(d.id.clone()))?;
        if reference.len() != d.turns.len() {
            return Err(EvalError::LengthMismatch {
                hypotheses: d.turns.len(),
                references: reference.len(),
            });
        }
        hypotheses.extend(d.responses());
        refs.extend(reference.iter().map(String::as_str));
    }
    let bleu = corpus_bleu(&hypotheses, &refs)?;

    let n = outcomes.len();
    let inform_hits = outcomes.iter().filter(|o| o.iter().all(|x| x.inform)).count();
    let success_hits = outcomes.iter().filter(|o| o.iter().all(|x| x.success)).count();

    let mut per_domain_counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for o in outcomes.iter().flatten() {
        let e = per_domain_counts.entry(o.domain.to_string()).or_default();
        e.0 += 1;
        e.1 += o.inform as usize;
        e.2 += o.success as usize;
    }
    let per_domain = per_domain_counts
        .into_iter()
        .map(|(d, (total, inf, suc))| {
            (
                d,
                DomainRates {
                    inform: percent(inf, total),
                    success: percent(suc, total),
                },
            )
        })
        .collect();

    let inform_rate = percent(inform_hits, n);
    let success_rate = percent(success_hits, n);
    Ok(EvalReport {
        bleu,
        inform_rate,
        success_rate,
        combined: combined(bleu, inform_rate, success_rate),
        per_domain,
    })
}
