//! One round of the sample / label / detect / emit loop, its statistics
//! report, and the stopping rule.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{ModelError, PipelineError};
use crate::eval::{evaluate_corpus, EvalReport};
use crate::generator::{greedy_dialog, sample_dialog, GeneratorBackend, SamplingConfig};
use crate::model::{Dialog, SubgoalKind};
use crate::subgoal::{
    assemble_candidates, detect_subgoals, emit_dpo, emit_sft, label_success, CandidateGroup,
    PairPolicy, SubgoalSample,
};

pub const SFT_FILE: &str = "sft.jsonl";
pub const DPO_FILE: &str = "dpo.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    #[default]
    Sft,
    Dpo,
}

impl TrainMode {
    pub fn file_name(self) -> &'static str {
        match self {
            TrainMode::Sft => SFT_FILE,
            TrainMode::Dpo => DPO_FILE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    pub iteration: u32,
    pub sampling: SamplingConfig,
    pub goal_fraction: f64,
    pub train_mode: TrainMode,
    pub pair_policy: PairPolicy,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl IterationConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        IterationConfig {
            iteration: 0,
            sampling: SamplingConfig::default(),
            goal_fraction: 0.5,
            train_mode: TrainMode::Sft,
            pair_policy: PairPolicy::First,
            workers: 0,
            out_dir: out_dir.into(),
        }
    }

    /// Goal sampling and generation seeds move with the iteration index.
    fn iteration_seed(&self) -> u64 {
        self.sampling.seed.wrapping_add(u64::from(self.iteration))
    }

    fn iteration_sampling(&self) -> SamplingConfig {
        SamplingConfig {
            seed: self.iteration_seed(),
            ..self.sampling.clone()
        }
    }
}

/// Uniform sample without replacement of `ceil(fraction * n)` goal ids,
/// returned in sorted order.
pub fn subsample_goals(all_goal_ids: &[String], fraction: f64, seed: u64) -> Result<Vec<String>, ModelError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(ModelError::Invalid(format!("goal fraction {fraction} not in (0, 1]")));
    }
    let n = ((fraction * all_goal_ids.len() as f64).ceil() as usize).min(all_goal_ids.len());
    let mut ids: Vec<String> = all_goal_ids.to_vec();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<String> = ids.choose_multiple(&mut rng, n).cloned().collect();
    chosen.sort();
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub state: usize,
    pub act_response: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedGoal {
    pub goal_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: u32,
    pub k: usize,
    pub train_mode: TrainMode,
    pub n_goals_sampled: usize,
    pub n_dialogs_total: usize,
    pub n_dialogs_successful: usize,
    pub n_dialogs_unsuccessful: usize,
    /// Entry `i` counts goals with exactly `i` successful candidates, `0..=k*k+1`.
    pub success_histogram: Vec<usize>,
    pub n_goals_with_subgoals: usize,
    pub n_subgoal_samples: KindCounts,
    pub n_records: usize,
    pub files: Vec<String>,
    pub skipped_goals: Vec<SkippedGoal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_eval: Option<EvalReport>,
}

/// Outcome of sampling one goal.
pub enum GoalResult {
    Group(CandidateGroup),
    Skipped(SkippedGoal),
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ModelError::Invalid(format!("cannot start worker pool: {e}")).into())
}

fn sample_group(
    backend: &dyn GeneratorBackend,
    corpus: &Corpus,
    source: &Dialog,
    sampling: &SamplingConfig,
) -> Result<GoalResult, PipelineError> {
    let samples = match sample_dialog(backend, source, sampling) {
        Ok(s) => s,
        Err(e @ PipelineError::Backend { .. }) => {
            return Ok(GoalResult::Skipped(SkippedGoal {
                goal_id: source.goal_id.clone(),
                error: e.to_string(),
            }))
        }
        Err(e) => return Err(e),
    };
    let dialogs = assemble_candidates(source, &samples, sampling.k)?;
    let goal = &corpus.goals[&source.goal_id];
    Ok(GoalResult::Group(label_success(source, goal, dialogs, &corpus.db)?))
}

/// Samples and labels candidates for the given goals, in goal-id order.
pub fn sample_groups(
    corpus: &Corpus,
    backend: &dyn GeneratorBackend,
    goal_ids: &[String],
    sampling: &SamplingConfig,
    workers: usize,
) -> Result<Vec<GoalResult>, PipelineError> {
    let wanted: BTreeSet<&String> = goal_ids.iter().collect();
    let sources: Vec<&Dialog> = corpus.dialogs.iter().filter(|d| wanted.contains(&d.goal_id)).collect();
    let mut results: Vec<(String, GoalResult)> = pool(workers)?.install(|| {
        sources
            .par_iter()
            .map(|d| sample_group(backend, corpus, d, sampling).map(|r| (d.goal_id.clone(), r)))
            .collect::<Result<_, _>>()
    })?;
    results.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(results.into_iter().map(|(_, r)| r).collect())
}

/// Runs detection over every group; output follows group order.
pub fn detect_all(
    groups: &[CandidateGroup],
    corpus: &Corpus,
    workers: usize,
) -> Result<Vec<SubgoalSample>, PipelineError> {
    let per_group: Vec<Vec<SubgoalSample>> = pool(workers)?.install(|| {
        groups
            .par_iter()
            .map(|g| detect_subgoals(g, &corpus.db))
            .collect::<Result<_, _>>()
    })?;
    Ok(per_group.into_iter().flatten().collect())
}

/// Greedy-decodes every dialog of `dev` and evaluates against its references.
pub fn evaluate_greedy(
    dev: &Corpus,
    backend: &dyn GeneratorBackend,
    sampling: &SamplingConfig,
    workers: usize,
) -> Result<EvalReport, PipelineError> {
    let predictions: Vec<Dialog> = pool(workers)?.install(|| {
        dev.dialogs
            .par_iter()
            .map(|d| greedy_dialog(backend, d, sampling))
            .collect::<Result<_, _>>()
    })?;
    Ok(evaluate_corpus(&predictions, &dev.goals, &dev.db, &dev.references())?)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(io_err(path))
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&text).map_err(io_err(path))
}

/// Writes the training file for `mode` and returns (file name, record count).
pub fn write_training_file(
    dir: &Path,
    samples: &[SubgoalSample],
    mode: TrainMode,
    policy: PairPolicy,
) -> Result<(String, usize), PipelineError> {
    let name = mode.file_name();
    let path = dir.join(name);
    let n = match mode {
        TrainMode::Sft => {
            let records = emit_sft(samples);
            write_jsonl(&path, &records)?;
            records.len()
        }
        TrainMode::Dpo => {
            let records = emit_dpo(samples, policy);
            write_jsonl(&path, &records)?;
            records.len()
        }
    };
    Ok((name.to_string(), n))
}

/// One full iteration: subsample goals, sample and label candidates, detect
/// subgoals, write the training file and `report.json`.
///
/// Goals whose sampling hits a backend error are skipped and listed in the
/// report. With a dev corpus the report also carries its greedy evaluation.
pub fn run_iteration(
    corpus: &Corpus,
    backend: &dyn GeneratorBackend,
    cfg: &IterationConfig,
    dev: Option<&Corpus>,
) -> Result<IterationReport, PipelineError> {
    let k = cfg.sampling.k;
    let goal_ids = subsample_goals(&corpus.goal_ids(), cfg.goal_fraction, cfg.iteration_seed())?;
    let sampling = cfg.iteration_sampling();
    let results = sample_groups(corpus, backend, &goal_ids, &sampling, cfg.workers)?;

    let mut groups = Vec::new();
    let mut skipped_goals = Vec::new();
    for r in results {
        match r {
            GoalResult::Group(g) => groups.push(g),
            GoalResult::Skipped(s) => skipped_goals.push(s),
        }
    }
    let samples = detect_all(&groups, corpus, cfg.workers)?;

    let mut success_histogram = vec![0; k * k + 2];
    let mut n_dialogs_successful = 0;
    let mut n_dialogs_unsuccessful = 0;
    for g in &groups {
        let s = g.n_successful();
        success_histogram[s.min(k * k + 1)] += 1;
        n_dialogs_successful += s;
        n_dialogs_unsuccessful += g.n_unsuccessful();
    }
    let mut counts = KindCounts::default();
    let mut goals_with_subgoals = BTreeSet::new();
    for s in &samples {
        match s.kind {
            SubgoalKind::State => counts.state += 1,
            SubgoalKind::ActResponse => counts.act_response += 1,
        }
        goals_with_subgoals.insert(s.goal_id.as_str());
    }

    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let (file, n_records) = write_training_file(&cfg.out_dir, &samples, cfg.train_mode, cfg.pair_policy)?;

    let dev_eval = match dev {
        Some(d) => Some(evaluate_greedy(d, backend, &sampling, cfg.workers)?),
        None => None,
    };

    let report = IterationReport {
        iteration: cfg.iteration,
        k,
        train_mode: cfg.train_mode,
        n_goals_sampled: goal_ids.len(),
        n_dialogs_total: n_dialogs_successful + n_dialogs_unsuccessful,
        n_dialogs_successful,
        n_dialogs_unsuccessful,
        success_histogram,
        n_goals_with_subgoals: goals_with_subgoals.len(),
        n_subgoal_samples: counts,
        n_records,
        files: vec![file, REPORT_FILE.to_string()],
        skipped_goals,
        dev_eval,
    };
    write_json_pretty(&cfg.out_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: u32,
    pub combined: f64,
}

/// Dev COMBINED score per finished iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopHistory {
    pub entries: Vec<HistoryEntry>,
}

impl LoopHistory {
    pub fn push(&mut self, iteration: u32, combined: f64) -> Result<(), ModelError> {
        if let Some(last) = self.entries.last() {
            if iteration <= last.iteration {
                return Err(ModelError::Invalid(format!(
                    "iteration {iteration} does not follow {}",
                    last.iteration
                )));
            }
        }
        self.entries.push(HistoryEntry { iteration, combined });
        Ok(())
    }

    pub fn should_stop(&self) -> bool {
        let scores: Vec<f64> = self.entries.iter().map(|e| e.combined).collect();
        should_stop(&scores)
    }
}

/// Stop once the latest COMBINED score fails to beat the previous one.
pub fn should_stop(combined_scores: &[f64]) -> bool {
    match combined_scores {
        [.., prev, last] => last <= prev,
        _ => false,
    }
}
