use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{placeholders, BeliefState, Dialog, DomainId, UserGoal};

fn default_true() -> bool {
    true
}

fn default_key() -> String {
    "name".to_string()
}

/// Slot and act inventory of one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub informable: Vec<String>,
    #[serde(default)]
    pub requestable: Vec<String>,
    #[serde(default)]
    pub acts: Vec<String>,
    /// Whether the domain has a database table.
    #[serde(default = "default_true")]
    pub entity_bearing: bool,
    /// Slot naming an entity; its placeholder marks an offer (`name`, or `id` for trains).
    #[serde(default = "default_key")]
    pub key: String,
}

impl DomainSchema {
    pub fn is_informable(&self, slot: &str) -> bool {
        self.informable.iter().any(|s| s == slot)
    }

    pub fn is_requestable(&self, slot: &str) -> bool {
        self.requestable.iter().any(|s| s == slot)
    }

    pub fn knows_slot(&self, slot: &str) -> bool {
        self.is_informable(slot) || self.is_requestable(slot) || self.key == slot
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    pub domains: BTreeMap<DomainId, DomainSchema>,
}

impl Ontology {
    pub fn new(domains: BTreeMap<DomainId, DomainSchema>) -> Result<Self, ModelError> {
        let ontology = Ontology { domains };
        ontology.check()?;
        Ok(ontology)
    }

    /// Checks internal consistency: non-empty lowercase domain names and
    /// unique slot names per domain.
    pub fn check(&self) -> Result<(), ModelError> {
        for (domain, schema) in &self.domains {
            let name = domain.as_str();
            if name.is_empty() || name.chars().any(|c| c.is_uppercase() || c.is_whitespace()) {
                return Err(ModelError::Invalid(format!("bad domain name {name:?}")));
            }
            for list in [&schema.informable, &schema.requestable, &schema.acts] {
                let unique: BTreeSet<_> = list.iter().collect();
                if unique.len() != list.len() {
                    return Err(ModelError::Invalid(format!(
                        "duplicate slot or act name in domain {name}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self, domain: &str) -> Result<&DomainSchema, ModelError> {
        self.domains
            .get(domain)
            .ok_or_else(|| ModelError::UnknownDomain(domain.to_string()))
    }

    pub fn validate_goal(&self, goal: &UserGoal) -> Result<(), ModelError> {
        if goal.domains.is_empty() {
            return Err(ModelError::Invalid("goal has no domains".into()));
        }
        for (domain, entry) in &goal.domains {
            let schema = self.schema(domain.as_str())?;
            for slot in entry.constraints.keys() {
                if !schema.is_informable(slot) {
                    return Err(unknown_slot(domain, slot));
                }
            }
            for slot in &entry.requests {
                if !schema.knows_slot(slot) {
                    return Err(unknown_slot(domain, slot));
                }
            }
        }
        Ok(())
    }

    pub fn validate_state(&self, state: &BeliefState) -> Result<(), ModelError> {
        for (domain, slots) in &state.domains {
            let schema = self.schema(domain.as_str())?;
            for (slot, value) in slots {
                if !schema.is_informable(slot) {
                    return Err(unknown_slot(domain, slot));
                }
                if value.trim().is_empty() {
                    return Err(ModelError::Invalid(format!(
                        "empty value for {domain} {slot}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Validates a ground-truth dialog: non-empty, states within the
    /// ontology, act verbs declared, and well-formed response placeholders.
    pub fn validate_dialog(&self, dialog: &Dialog) -> Result<(), ModelError> {
        if dialog.turns.is_empty() {
            return Err(ModelError::Invalid(format!("dialog {} has no turns", dialog.id)));
        }
        for turn in &dialog.turns {
            self.validate_state(&turn.system.state)?;
            for act in &turn.system.acts {
                let mut verb_known = false;
                for part in act.domain.as_str().split(' ') {
                    let schema = self.schema(part)?;
                    verb_known |= schema.acts.iter().any(|a| a == &act.act);
                }
                if !verb_known {
                    return Err(ModelError::Invalid(format!(
                        "act verb {:?} not declared for {}",
                        act.act, act.domain
                    )));
                }
            }
            for token in placeholders(&turn.system.response) {
                self.check_placeholder(token)?;
            }
        }
        Ok(())
    }

    fn check_placeholder(&self, token: &str) -> Result<(), ModelError> {
        let bad = || ModelError::Invalid(format!("malformed placeholder [{token}]"));
        let (domain, slot) = token.split_once('_').ok_or_else(bad)?;
        let schema = self.domains.get(domain).ok_or_else(bad)?;
        if schema.knows_slot(slot) {
            Ok(())
        } else {
            Err(bad())
        }
    }
}

fn unknown_slot(domain: &DomainId, slot: &str) -> ModelError {
    ModelError::UnknownSlot {
        domain: domain.to_string(),
        slot: slot.to_string(),
    }
}
