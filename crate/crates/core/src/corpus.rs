//! Self-contained corpus files: ontology, database and goal-annotated dialogs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db::{Database, Entity};
use crate::error::ModelError;
use crate::model::{Dialog, DomainId, Turn, UserGoal};
use crate::ontology::Ontology;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Json {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: ModelError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDialog {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_id: Option<String>,
    pub goal: UserGoal,
    pub turns: Vec<Turn>,
}

/// On-disk corpus layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub ontology: Ontology,
    #[serde(default)]
    pub database: BTreeMap<DomainId, Vec<Entity>>,
    pub dialogs: Vec<CorpusDialog>,
}

/// Dialog files without goals, e.g. model predictions to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogsFile {
    pub dialogs: Vec<Dialog>,
}

/// A validated corpus. Each goal belongs to exactly one dialog.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub db: Database,
    pub dialogs: Vec<Dialog>,
    pub goals: BTreeMap<String, UserGoal>,
}

impl Corpus {
    pub fn from_file(file: CorpusFile) -> Result<Self, ModelError> {
        let db = Database::new(file.ontology, file.database)?;
        let mut dialogs = Vec::with_capacity(file.dialogs.len());
        let mut goals = BTreeMap::new();
        let mut ids = BTreeSet::new();
        for cd in file.dialogs {
            if !ids.insert(cd.id.clone()) {
                return Err(ModelError::Invalid(format!("duplicate dialog id {:?}", cd.id)));
            }
            let goal_id = cd.goal_id.unwrap_or_else(|| cd.id.clone());
            db.ontology().validate_goal(&cd.goal)?;
            if goals.insert(goal_id.clone(), cd.goal).is_some() {
                return Err(ModelError::Invalid(format!(
                    "goal {goal_id:?} is shared by more than one dialog"
                )));
            }
            let mut dialog = Dialog {
                id: cd.id,
                goal_id,
                turns: cd.turns,
            };
            for turn in &mut dialog.turns {
                turn.system.state.domains.retain(|_, slots| !slots.is_empty());
            }
            db.ontology().validate_dialog(&dialog)?;
            dialogs.push(dialog);
        }
        dialogs.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Corpus { db, dialogs, goals })
    }

    pub fn to_file(&self) -> CorpusFile {
        CorpusFile {
            ontology: self.db.ontology().clone(),
            database: self.db.tables().clone(),
            dialogs: self
                .dialogs
                .iter()
                .map(|d| CorpusDialog {
                    id: d.id.clone(),
                    goal_id: (d.goal_id != d.id).then(|| d.goal_id.clone()),
                    goal: self.goals[&d.goal_id].clone(),
                    turns: d.turns.clone(),
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file: CorpusFile = read_json(path)?;
        Corpus::from_file(file).map_err(|source| CorpusError::Invalid {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn ontology(&self) -> &Ontology {
        self.db.ontology()
    }

    pub fn goal_ids(&self) -> Vec<String> {
        self.goals.keys().cloned().collect()
    }

    /// Reference responses by dialog id.
    pub fn references(&self) -> BTreeMap<String, Vec<String>> {
        self.dialogs
            .iter()
            .map(|d| (d.id.clone(), d.responses().map(str::to_string).collect()))
            .collect()
    }

    pub fn subset(&self, goal_ids: &BTreeSet<String>) -> Corpus {
        Corpus {
            db: self.db.clone(),
            dialogs: self
                .dialogs
                .iter()
                .filter(|d| goal_ids.contains(&d.goal_id))
                .cloned()
                .collect(),
            goals: self
                .goals
                .iter()
                .filter(|(g, _)| goal_ids.contains(*g))
                .map(|(g, v)| (g.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Reads a JSON document, reporting syntax errors with line and column.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &str) -> Result<T, CorpusError> {
    serde_json::from_str(text).map_err(|e| CorpusError::Json {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
