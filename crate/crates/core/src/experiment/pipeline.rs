use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TaskRef};
use super::ExperimentError;
use crate::data::{
    build_vocab, corpus_paths, generate_pairs, load_embeddings, load_parallel, split, split_seed, write_parallel, DataError,
    TaskDataset, TextPair, Vocabulary,
};
use crate::evaluation::{score_task, BleuReport, Smoothing, TaskScore};
use crate::langtree::{preprocess, LanguageTree};
use crate::model::{compile_route, ParameterStore, RouteManifest, Scheme, Side};
use crate::numerics::checkpoint;
use crate::training::{train_with, LogRecord, TrainConfig, TrainState, TrainTask};

/// Writes the synthetic corpora of `config` that are not on disk yet.
/// Returns the paths written.
pub fn ensure_corpora(config: &ExperimentConfig, tree: &LanguageTree) -> Result<Vec<PathBuf>, ExperimentError> {
    let Some(spec) = &config.synthetic else { return Ok(Vec::new()) };
    let dir = config.corpus_dir();
    let missing = spec.tasks.iter().any(|t| {
        let (s, g) = corpus_paths(&dir, &crate::model::task_label(&t.source, &t.target), &t.source, &t.target);
        !s.exists() || !g.exists()
    });
    if !missing {
        return Ok(Vec::new());
    }
    write_synthetic(config, tree)
}

/// Regenerates every synthetic corpus of `config`.
pub fn write_synthetic(config: &ExperimentConfig, tree: &LanguageTree) -> Result<Vec<PathBuf>, ExperimentError> {
    let Some(spec) = &config.synthetic else {
        return Err(ExperimentError::Config("config has no synthetic spec".into()));
    };
    let dir = config.corpus_dir();
    let mut written = Vec::new();
    for (t, pairs) in generate_pairs(tree, spec)? {
        let label = crate::model::task_label(&t.source, &t.target);
        let (a, b) = write_parallel(&dir, &label, &t.source, &t.target, &pairs)?;
        written.extend([a, b]);
    }
    Ok(written)
}

/// Loads and splits the corpus of each task.
pub fn load_datasets(config: &ExperimentConfig, tasks: &[TaskRef]) -> Result<Vec<TaskDataset>, ExperimentError> {
    let dir = config.corpus_dir();
    tasks
        .iter()
        .map(|t| {
            let (s, g) = corpus_paths(&dir, &t.label(), &t.source, &t.target);
            let pairs = load_parallel(&s, &g)?;
            Ok(split(&t.source, &t.target, pairs, split_seed(config.seed, &t.source, &t.target))?)
        })
        .collect()
}

/// Raw pairs of the held-out development tasks.
pub fn load_dev(config: &ExperimentConfig) -> Result<Vec<(TaskRef, Vec<TextPair>)>, ExperimentError> {
    let dir = config.corpus_dir();
    config
        .dev_tasks
        .iter()
        .map(|t| {
            let (s, g) = corpus_paths(&dir, &t.label(), &t.source, &t.target);
            Ok((t.clone(), load_parallel(&s, &g)?))
        })
        .collect()
}

/// Vocabularies of every language, built from the training splits it
/// appears in. Every vocabulary reserves the same target-token block.
pub fn build_vocabs(datasets: &[TaskDataset], min_count: usize) -> BTreeMap<String, Vocabulary> {
    let targets: Vec<String> = datasets
        .iter()
        .map(|d| d.target_lang.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut sentences: BTreeMap<&str, Vec<&[String]>> = BTreeMap::new();
    for d in datasets {
        let s = sentences.entry(&d.source_lang).or_default();
        s.extend(d.train.iter().map(|p| p.source.as_slice()));
        let t = sentences.entry(&d.target_lang).or_default();
        t.extend(d.train.iter().map(|p| p.target.as_slice()));
    }
    sentences
        .into_iter()
        .map(|(l, s)| (l.to_string(), build_vocab(s, l, min_count, &targets)))
        .collect()
}

/// Everything one training run needs, built deterministically from data
/// and config.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// The tree routes were compiled on (preprocessed for HNMT).
    pub tree: LanguageTree,
    pub vocabs: BTreeMap<String, Vocabulary>,
    /// Tasks in round-robin order.
    pub tasks: Vec<TrainTask>,
    /// Text splits, aligned with `tasks`.
    pub texts: Vec<TaskDataset>,
    pub store: ParameterStore,
}

impl Prepared {
    pub fn manifest(&self, scheme: Scheme, layers: usize) -> RouteManifest {
        let routes: Vec<_> = self.tasks.iter().map(|t| t.route.clone()).collect();
        RouteManifest::new(scheme, layers, &routes)
    }
}

/// Compiles routes, builds vocabularies and registers every parameter.
pub fn prepare(
    tree: &LanguageTree,
    datasets: &[TaskDataset],
    config: &TrainConfig,
    min_count: usize,
) -> Result<Prepared, ExperimentError> {
    let route_tree = if config.scheme == Scheme::Hnmt {
        preprocess(tree, config.layers).map_err(|e| ExperimentError::Config(e.to_string()))?
    } else {
        tree.clone()
    };
    let vocabs = build_vocabs(datasets, min_count);
    let mut store = ParameterStore::new(config.dims(), config.seed);
    let mut pairs = Vec::new();
    for d in datasets {
        let route = compile_route(&route_tree, &d.source_lang, &d.target_lang, config.scheme, config.layers)
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let (sv, tv) = (&vocabs[&d.source_lang], &vocabs[&d.target_lang]);
        store.ensure_route(&route, sv.len(), tv.len());
        let token = if route.needs_target_token { sv.target_token(&d.target_lang) } else { None };
        let data = d.encode(sv, tv, token);
        pairs.push((TrainTask { route, data }, d.clone()));
    }
    // Round-robin order: lexicographic by (source, target).
    pairs.sort_by(|a, b| (&a.0.route.source, &a.0.route.target).cmp(&(&b.0.route.source, &b.0.route.target)));
    let (tasks, texts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(Prepared {
        tree: route_tree,
        vocabs,
        tasks,
        texts,
        store,
    })
}

/// Copies pretrained vectors into every embedding table of `language`.
/// Returns the coverage of each language that had a file.
pub fn apply_embeddings(p: &mut Prepared, files: &BTreeMap<String, PathBuf>, fallback: bool) -> Result<BTreeMap<String, f64>, ExperimentError> {
    let mut coverage = BTreeMap::new();
    let dim = p.store.dims.embed_dim;
    for (lang, path) in files {
        let Some(vocab) = p.vocabs.get(lang) else { continue };
        let table = load_embeddings(path, vocab, dim, p.store.seed(), fallback)?;
        coverage.insert(lang.clone(), table.coverage(vocab));
        let rows = table.covered_rows();
        let owners: Vec<(Side, String)> = p
            .tasks
            .iter()
            .flat_map(|t| {
                let mut v = Vec::new();
                if &t.route.source == lang {
                    v.push((Side::Encoder, t.route.source_owner.clone()));
                }
                if &t.route.target == lang {
                    v.push((Side::Decoder, t.route.target_owner.clone()));
                }
                v
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for (side, owner) in owners {
            p.store.set_embedding_rows(side, &owner, &rows);
        }
    }
    Ok(coverage)
}

/// Test BLEU of every task, scored in parallel.
pub fn score_tasks(
    p: &Prepared,
    scheme: Scheme,
    seed: u64,
    batch: usize,
    smoothing: Smoothing,
) -> Result<Vec<(TaskScore, BleuReport)>, ExperimentError> {
    p.tasks
        .par_iter()
        .zip(&p.texts)
        .map(|(t, text)| {
            let sources: Vec<Vec<usize>> = t.data.test.iter().map(|x| x.source.clone()).collect();
            let refs: Vec<Vec<String>> = text.test.iter().map(|x| x.target.clone()).collect();
            let report = score_task(&p.store, &t.route, &sources, &refs, &p.vocabs[&t.route.target], batch, smoothing)?;
            Ok((
                TaskScore {
                    source: t.route.source.clone(),
                    target: t.route.target.clone(),
                    scheme,
                    seed,
                    bleu: report.bleu,
                    train_pairs: t.data.train.len(),
                },
                report,
            ))
        })
        .collect()
}

/// Summary of one finished run, stored as `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scheme: Scheme,
    pub seed: u64,
    pub rounds: usize,
    pub best_round: usize,
    pub best_val_loss: f64,
    pub early_stopped: bool,
    pub history: Vec<f64>,
    pub val_history: Vec<f64>,
    pub scores: Vec<TaskScore>,
    pub reports: BTreeMap<String, BleuReport>,
    #[serde(default)]
    pub embedding_coverage: BTreeMap<String, f64>,
}

pub const RESULTS_FILE: &str = "results.json";
pub const LOG_FILE: &str = "train_log.jsonl";
pub const CHECKPOINT_FILE: &str = "best.ckpt";

pub fn run_dir(out: &Path, scheme: Scheme, seed: u64) -> PathBuf {
    out.join(scheme.as_str()).join(format!("seed-{seed}"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Data(DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn log_lines(log: &[LogRecord]) -> String {
    log.iter()
        .map(|r| serde_json::to_string(r).expect("log serializes") + "\n")
        .collect()
}

/// Trains one (scheme, seed) run over `datasets`, scores the best model on
/// the test splits and writes the run directory.
pub fn run_training(
    config: &ExperimentConfig,
    tree: &LanguageTree,
    datasets: &[TaskDataset],
    scheme: Scheme,
    seed: u64,
    mut progress: impl FnMut(&TrainState),
) -> Result<(RunResult, PathBuf), ExperimentError> {
    let tc = config.train_config(scheme, seed);
    let mut p = prepare(tree, datasets, &tc, config.min_count)?;
    let coverage = apply_embeddings(&mut p, &config.embeddings, config.embedding_fallback)?;
    let outcome = train_with(&p.tasks, &tc, &mut p.store, &mut progress)?;
    let state = outcome.state;
    let best = state.best.as_ref().expect("at least one round");
    let scored = score_tasks(&p, scheme, seed, config.eval_batch, config.smoothing)?;
    let dir = run_dir(&config.out, scheme, seed);
    write_file(&dir.join(LOG_FILE), &log_lines(&state.log))?;
    let ckpt = dir.join(CHECKPOINT_FILE);
    checkpoint::save(&p.store.params, &ckpt).map_err(|e| io_err(&ckpt, e))?;
    write_file(&dir.join("tree.json"), &p.tree.to_json())?;
    write_file(&dir.join("routes.json"), &p.manifest(scheme, tc.layers).to_json())?;
    for (l, v) in &p.vocabs {
        write_file(&dir.join("vocab").join(format!("{l}.json")), &serde_json::to_string(v).expect("vocab serializes"))?;
    }
    let result = RunResult {
        scheme,
        seed,
        rounds: state.round,
        best_round: best.round,
        best_val_loss: best.val_loss,
        early_stopped: outcome.early_stopped,
        history: state.history.clone(),
        val_history: state.val_history.clone(),
        reports: scored.iter().map(|(s, r)| (crate::model::task_label(&s.source, &s.target), r.clone())).collect(),
        scores: scored.into_iter().map(|(s, _)| s).collect(),
        embedding_coverage: coverage,
    };
    write_file(&dir.join(RESULTS_FILE), &serde_json::to_string_pretty(&result).expect("results serialize"))?;
    Ok((result, dir))
}

/// Every `results.json` below `dir`, in path order.
pub fn collect_results(dir: &Path) -> Result<Vec<RunResult>, ExperimentError> {
    let mut found = Vec::new();
    collect_into(dir, &mut found)?;
    found.sort();
    found
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text).map_err(|e| io_err(p, e))
        })
        .collect()
}

fn collect_into(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), ExperimentError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for e in entries {
        let path = e.map_err(|e| io_err(dir, e))?.path();
        if path.is_dir() {
            collect_into(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == RESULTS_FILE) {
            found.push(path);
        }
    }
    Ok(())
}
