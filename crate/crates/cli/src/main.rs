//! `subgoal`: evaluate dialogs, sample candidates, detect subgoals and run
//! training-data iterations from the command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subgoal_core::corpus::{read_json, CorpusError};
use subgoal_core::driver::{
    detect_all, run_iteration, sample_groups, write_json_pretty, write_jsonl, write_training_file, GoalResult,
    IterationConfig, IterationReport, LoopHistory, TrainMode, CANDIDATES_FILE,
};
use subgoal_core::generator::{
    ErrorInjectionConfig, GeneratorBackend, HttpBackend, HttpConfig, SamplingConfig, ScriptedBackend,
};
use subgoal_core::subgoal::{CandidateGroup, PairPolicy};
use subgoal_core::synth::{synth_corpus_file, SynthConfig};
use subgoal_core::{evaluate_corpus, BackendError, Corpus, DialogsFile, EvalError, PipelineError};

const BACKEND_URL_ENV: &str = "SUIT_BACKEND_URL";

#[derive(Parser)]
#[command(name = "subgoal", version, about = "Subgoal-aware training data for task-oriented dialog models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predicted dialogs against a corpus (INFORM, SUCCESS, BLEU, COMBINED).
    Evaluate(EvaluateArgs),
    /// Sample and label candidate dialogs; writes candidates.jsonl.
    Sample(SampleArgs),
    /// Detect subgoals in sampled candidates; writes sft.jsonl or dpo.jsonl.
    Detect(DetectArgs),
    /// Run one full iteration: sample, label, detect, emit, report.
    Iterate(IterateArgs),
    /// Tabulate iteration reports.
    Stats(StatsArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Also print the per-domain INFORM / SUCCESS table (to stderr).
    #[arg(long)]
    per_domain: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Scripted,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sft,
    Dpo,
}

impl From<Mode> for TrainMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sft => TrainMode::Sft,
            Mode::Dpo => TrainMode::Dpo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    First,
    All,
}

impl From<Policy> for PairPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::First => PairPolicy::First,
            Policy::All => PairPolicy::All,
        }
    }
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "scripted")]
    backend: BackendKind,
    /// Completion endpoint; SUIT_BACKEND_URL takes precedence when set.
    #[arg(long)]
    backend_url: Option<String>,
    /// Random error rate of the scripted backend's sampled generations.
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    /// JSON file with planted scripted-backend errors.
    #[arg(long)]
    injections: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_retries: u32,
    #[arg(long, default_value_t = 8)]
    max_in_flight: usize,
}

#[derive(Args)]
struct SamplingArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Sampled generations per stage, in addition to the greedy one.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0.5)]
    goal_fraction: f64,
    #[arg(long, default_value_t = 0)]
    iteration: u32,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, value_enum, default_value = "sft")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "first")]
    pair_policy: Policy,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IterateArgs {
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long, value_enum, default_value = "sft")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "first")]
    pair_policy: Policy,
    /// Dev corpus for greedy evaluation of the current model.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Loop history JSON; the dev COMBINED score is appended and the stopping rule reported.
    #[arg(long, requires = "dev")]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, num_args = 1.., required = true)]
    report: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    dialogs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    entities: usize,
    #[arg(long, default_value_t = 3)]
    max_domains: usize,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Validation(String),
    Backend(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Backend(m) | Failure::Other(m) => m,
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Backend { .. } => Failure::Backend(e.to_string()),
            PipelineError::Eval(_) | PipelineError::Model(_) | PipelineError::IncompleteSamples { .. } => {
                Failure::Validation(e.to_string())
            }
            PipelineError::Io { .. } | PipelineError::Json(_) => Failure::Other(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Failure::Other(e.to_string()))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let predictions: DialogsFile = read_json(&args.predictions)?;
    let report = evaluate_corpus(&predictions.dialogs, &corpus.goals, &corpus.db, &corpus.references())?;
    print_json(&report)?;
    if args.per_domain {
        eprint!("{}", report.domain_table());
    }
    Ok(())
}

/// Scripted worlds cover the training corpus and, when given, the dev corpus.
fn scripted_world(corpus: &Corpus, dev: Option<&Corpus>) -> Result<Corpus> {
    let mut world = corpus.clone();
    if let Some(dev) = dev {
        for d in &dev.dialogs {
            if world.dialogs.iter().any(|x| x.id == d.id) {
                continue;
            }
            let goal = &dev.goals[&d.goal_id];
            if let Some(existing) = world.goals.get(&d.goal_id) {
                if existing != goal {
                    return Err(Failure::Validation(format!(
                        "goal id {:?} means different goals in corpus and dev set",
                        d.goal_id
                    )));
                }
            }
            world.goals.insert(d.goal_id.clone(), goal.clone());
            world.dialogs.push(d.clone());
        }
    }
    Ok(world)
}

fn make_backend(args: &BackendArgs, corpus: &Corpus, dev: Option<&Corpus>, seed: u64) -> Result<Box<dyn GeneratorBackend>> {
    match args.backend {
        BackendKind::Scripted => {
            let mut noise = match &args.injections {
                Some(path) => read_json::<ErrorInjectionConfig>(path)?,
                None => ErrorInjectionConfig::default(),
            };
            if !(0.0..=1.0).contains(&args.noise_rate) {
                return Err(Failure::Validation(format!("--noise-rate {} not in [0, 1]", args.noise_rate)));
            }
            if args.noise_rate > 0.0 {
                noise.random_rate = args.noise_rate;
            }
            let world = scripted_world(corpus, dev)?;
            Ok(Box::new(ScriptedBackend::new(&world, noise, seed)))
        }
        BackendKind::Http => {
            let url = std::env::var(BACKEND_URL_ENV)
                .ok()
                .filter(|u| !u.is_empty())
                .or_else(|| args.backend_url.clone())
                .ok_or_else(|| {
                    Failure::Validation(format!("--backend http needs --backend-url or {BACKEND_URL_ENV}"))
                })?;
            let config = HttpConfig {
                max_retries: args.max_retries,
                max_in_flight: args.max_in_flight,
                ..HttpConfig::default()
            };
            let backend = HttpBackend::new(&url, config).map_err(|e| match e {
                BackendError::Unavailable(m) => Failure::Validation(m),
                other => Failure::Backend(other.to_string()),
            })?;
            Ok(Box::new(backend))
        }
    }
}

fn sampling_config(args: &SamplingArgs) -> Result<SamplingConfig> {
    if args.k == 0 {
        return Err(Failure::Validation("--k must be at least 1".into()));
    }
    if !(args.temperature > 0.0) {
        return Err(Failure::Validation("--temperature must be positive".into()));
    }
    if !(args.goal_fraction > 0.0 && args.goal_fraction <= 1.0) {
        return Err(Failure::Validation(format!("--goal-fraction {} not in (0, 1]", args.goal_fraction)));
    }
    Ok(SamplingConfig {
        k: args.k,
        temperature: args.temperature,
        seed: args.seed,
        ..SamplingConfig::default()
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Failure::Other(format!("cannot create {}: {e}", path.display())))
}

fn all_skipped(sampled: usize, skipped: usize) -> bool {
    sampled > 0 && skipped == sampled
}

fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let a = &args.sampling;
    let sampling = sampling_config(a)?;
    let corpus = Corpus::load(&a.corpus)?;
    let backend = make_backend(&a.backend, &corpus, None, a.seed)?;
    let cfg = IterationConfig {
        iteration: a.iteration,
        sampling,
        goal_fraction: a.goal_fraction,
        workers: a.workers,
        ..IterationConfig::new(&a.out)
    };
    let seed = cfg.sampling.seed.wrapping_add(u64::from(cfg.iteration));
    let goal_ids = subgoal_core::driver::subsample_goals(&corpus.goal_ids(), cfg.goal_fraction, seed)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let sampling = SamplingConfig { seed, ..cfg.sampling.clone() };
    let results = sample_groups(&corpus, backend.as_ref(), &goal_ids, &sampling, cfg.workers)?;
    let mut groups = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            GoalResult::Group(g) => groups.push(g),
            GoalResult::Skipped(s) => {
                skipped += 1;
                eprintln!("skipped goal {}: {}", s.goal_id, s.error);
            }
        }
    }
    if all_skipped(goal_ids.len(), skipped) {
        return Err(Failure::Backend("backend failed for every sampled goal".into()));
    }
    create_dir(&a.out)?;
    write_jsonl(&a.out.join(CANDIDATES_FILE), &groups)?;
    let successful: usize = groups.iter().map(CandidateGroup::n_successful).sum();
    let total: usize = groups.iter().map(|g| g.candidates.len()).sum();
    eprintln!(
        "{} goals, {total} candidates ({successful} successful, {} unsuccessful), {skipped} skipped",
        groups.len(),
        total - successful
    );
    Ok(())
}

fn read_groups(path: &Path) -> Result<Vec<CandidateGroup>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| {
                Failure::Validation(format!("{}: line {}, column {}: {e}", path.display(), i + 1, e.column()))
            })
        })
        .collect()
}

fn cmd_detect(args: &DetectArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let groups = read_groups(&args.candidates)?;
    for g in &groups {
        if !corpus.goals.contains_key(&g.goal_id) {
            return Err(Failure::Validation(format!("candidate group for unknown goal {:?}", g.goal_id)));
        }
    }
    let samples = detect_all(&groups, &corpus, args.workers)?;
    create_dir(&args.out)?;
    let (file, n) = write_training_file(&args.out, &samples, args.mode.into(), args.pair_policy.into())?;
    eprintln!("{n} records from {} subgoal samples written to {file}", samples.len());
    Ok(())
}

fn cmd_iterate(args: &IterateArgs) -> Result<()> {
    let a = &args.sampling;
    let sampling = sampling_config(a)?;
    let corpus = Corpus::load(&a.corpus)?;
    let dev = args.dev.as_deref().map(Corpus::load).transpose()?;
    let backend = make_backend(&a.backend, &corpus, dev.as_ref(), a.seed)?;
    let cfg = IterationConfig {
        iteration: a.iteration,
        sampling,
        goal_fraction: a.goal_fraction,
        train_mode: args.mode.into(),
        pair_policy: args.pair_policy.into(),
        workers: a.workers,
        out_dir: a.out.clone(),
    };
    let report = run_iteration(&corpus, backend.as_ref(), &cfg, dev.as_ref())?;
    print_json(&report)?;
    if all_skipped(report.n_goals_sampled, report.skipped_goals.len()) {
        return Err(Failure::Backend("backend failed for every sampled goal".into()));
    }
    if let (Some(path), Some(eval)) = (&args.history, &report.dev_eval) {
        let mut history: LoopHistory = if path.exists() { read_json(path)? } else { LoopHistory::default() };
        history
            .push(report.iteration, eval.combined)
            .map_err(|e| Failure::Validation(e.to_string()))?;
        write_json_pretty(path, &history)?;
        eprintln!(
            "dev COMBINED {:.2}; {}",
            eval.combined,
            if history.should_stop() { "no improvement, stop" } else { "continue" }
        );
    }
    Ok(())
}

fn stats_table(reports: &[IterationReport]) -> String {
    let buckets = reports.iter().map(|r| r.success_histogram.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = write!(out, "{:>5} {:>5} {:>3} {:>7} {:>8} {:>8} {:>8}", "iter", "mode", "k", "goals", "dialogs", "success", "failed");
    for b in 0..buckets {
        let _ = write!(out, " {:>6}", format!("h{b}"));
    }
    let _ = writeln!(out, " {:>8} {:>8} {:>8} {:>8} {:>7}", "w/subg", "state", "act_resp", "records", "skipped");
    for r in reports {
        let mode = match r.train_mode {
            TrainMode::Sft => "sft",
            TrainMode::Dpo => "dpo",
        };
        let _ = write!(
            out,
            "{:>5} {:>5} {:>3} {:>7} {:>8} {:>8} {:>8}",
            r.iteration, mode, r.k, r.n_goals_sampled, r.n_dialogs_total, r.n_dialogs_successful, r.n_dialogs_unsuccessful
        );
        for b in 0..buckets {
            match r.success_histogram.get(b) {
                Some(n) => {
                    let _ = write!(out, " {n:>6}");
                }
                None => {
                    let _ = write!(out, " {:>6}", "-");
                }
            }
        }
        let _ = writeln!(
            out,
            " {:>8} {:>8} {:>8} {:>8} {:>7}",
            r.n_goals_with_subgoals,
            r.n_subgoal_samples.state,
            r.n_subgoal_samples.act_response,
            r.n_records,
            r.skipped_goals.len()
        );
    }
    out
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let mut reports: Vec<IterationReport> = args.report.iter().map(|p| read_json(p)).collect::<std::result::Result<_, _>>()?;
    reports.sort_by_key(|r| r.iteration);
    print!("{}", stats_table(&reports));
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let file = synth_corpus_file(&SynthConfig {
        n_dialogs: args.dialogs,
        seed: args.seed,
        entities_per_domain: args.entities,
        max_domains: args.max_domains,
    });
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json_pretty(&args.out, &file)?;
    let by_domain: BTreeMap<String, usize> = file.database.iter().map(|(d, rows)| (d.to_string(), rows.len())).collect();
    eprintln!("{} dialogs, entities {by_domain:?}", file.dialogs.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Iterate(a) => cmd_iterate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
