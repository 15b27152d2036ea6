//! Subgoal-aware training-data pipeline for task-oriented dialog models.
//!
//! Candidate dialogs are sampled turn by turn from a generator, labeled with
//! dialog-level success, and every turn-level generation whose replacement
//! by a failed candidate's fragment breaks success becomes a supervised or
//! preference training sample.

pub mod bleu;
pub mod corpus;
pub mod db;
pub mod driver;
pub mod error;
pub mod eval;
pub mod generator;
pub mod model;
pub mod ontology;
pub mod seed;
pub mod subgoal;
pub mod synth;

pub use corpus::{Corpus, CorpusError, CorpusFile, DialogsFile};
pub use db::{Database, Entity};
pub use error::{BackendError, EvalError, ModelError, PipelineError};
pub use eval::{combined, dialog_success, evaluate_corpus, EvalReport};
pub use model::{
    BeliefState, Dialog, DialogAct, DialogContext, DomainId, Fragment, GoalDomain, SubgoalKind,
    SystemTurn, Turn, UserGoal,
};
pub use ontology::{DomainSchema, Ontology};
