use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use super::pipeline::{
    collect_results, ensure_corpora, load_datasets, prepare, run_dir, run_training, score_tasks, write_file, write_synthetic,
    CHECKPOINT_FILE,
};
use super::ExperimentError;
use crate::data::{corpus_paths, load_parallel, token_overlap};
use crate::evaluation::{
    group_by_similarity, group_by_size, histogram, histogram_csv, language_summary, paired_t_test, TaskScore,
};
use crate::langtree::{duplicate_leaves, limit_depth, preprocess, prune_redundant_families, similarity, LanguageTree};
use crate::model::{compile_route, RouteManifest, Scheme};
use crate::numerics::checkpoint;
use crate::training::TrainState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeOp {
    Show,
    Prune,
    Limit,
    Duplicate,
    Preprocess,
    Similarity(String, String),
}

fn tree_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

fn depth_for(layers: Option<usize>) -> Result<(usize, usize), ExperimentError> {
    let n = layers.ok_or_else(|| ExperimentError::Config("this operation needs --N".into()))?;
    if n < 3 {
        return Err(ExperimentError::Config(format!("--N must be at least 3, got {n}")));
    }
    Ok((n, n - 2))
}

/// Applies a tree operation and returns the rendered tree or value.
/// `dump_json` receives the resulting tree as JSON.
pub fn cmd_tree(tree: &LanguageTree, op: &TreeOp, layers: Option<usize>, dump_json: Option<&Path>) -> Result<String, ExperimentError> {
    let result = match op {
        TreeOp::Similarity(a, b) => return Ok(format!("{}\n", similarity(tree, a, b).map_err(tree_err)?)),
        TreeOp::Show => tree.clone(),
        TreeOp::Prune => prune_redundant_families(tree),
        TreeOp::Limit => limit_depth(tree, depth_for(layers)?.1).map_err(tree_err)?,
        TreeOp::Duplicate => duplicate_leaves(tree, depth_for(layers)?.1).map_err(tree_err)?,
        TreeOp::Preprocess => preprocess(tree, depth_for(layers)?.0).map_err(tree_err)?,
    };
    if let Some(p) = dump_json {
        write_file(p, &result.to_json())?;
    }
    Ok(result.render())
}

/// Sharing manifest of `scheme` over the config's training tasks.
pub fn manifest(config: &ExperimentConfig, tree: &LanguageTree, scheme: Scheme) -> Result<RouteManifest, ExperimentError> {
    let layers = config.train.layers;
    let t = if scheme == Scheme::Hnmt {
        preprocess(tree, layers).map_err(tree_err)?
    } else {
        tree.clone()
    };
    let routes = config
        .training_tasks()
        .iter()
        .map(|task| compile_route(&t, &task.source, &task.target, scheme, layers).map_err(tree_err))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RouteManifest::new(scheme, layers, &routes))
}

/// Writes `<out>/routes/<scheme>.json` for every configured scheme.
pub fn cmd_routes(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let tree = config.load_tree()?;
    let mut out = String::new();
    for &s in &config.schemes {
        let m = manifest(config, &tree, s)?;
        let path = config.out.join("routes").join(format!("{s}.json"));
        write_file(&path, &(m.to_json() + "\n"))?;
        let _ = writeln!(out, "{s}: {} tasks -> {}", m.tasks.len(), path.display());
        for t in &m.tasks {
            let _ = writeln!(out, "  {}-{}: enc {:?} dec {:?}", t.source, t.target, t.encoder, t.decoder);
        }
    }
    Ok(out)
}

/// Generates the synthetic corpora and reports their surface overlap.
pub fn cmd_synth(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let tree = config.load_tree()?;
    write_synthetic(config, &tree)?;
    let dir = config.corpus_dir();
    let mut out = format!("corpora in {}\n", dir.display());
    for t in config.all_tasks() {
        let (s, g) = corpus_paths(&dir, &t.label(), &t.source, &t.target);
        let pairs = load_parallel(&s, &g)?;
        let sim = similarity(&tree, &t.source, &t.target).map_err(tree_err)?;
        let _ = writeln!(
            out,
            "  {}: {} pairs, similarity {sim}, token overlap {:.3}",
            t.label(),
            pairs.len(),
            token_overlap(&pairs)
        );
    }
    Ok(out)
}

/// Trains every (scheme, seed) run of the config.
pub fn cmd_train(config: &ExperimentConfig, mut progress: impl FnMut(Scheme, u64, &TrainState)) -> Result<String, ExperimentError> {
    let tree = config.load_tree()?;
    ensure_corpora(config, &tree)?;
    let datasets = load_datasets(config, &config.training_tasks())?;
    let mut out = String::new();
    for &scheme in &config.schemes {
        for seed in config.seeds() {
            let (r, dir) = run_training(config, &tree, &datasets, scheme, seed, |st| progress(scheme, seed, st))?;
            let _ = writeln!(
                out,
                "{scheme} seed {seed}: {} rounds, best round {} (val loss {:.4}) -> {}",
                r.rounds,
                r.best_round,
                r.best_val_loss,
                dir.display()
            );
            for s in &r.scores {
                let _ = writeln!(out, "  {}-{}: test BLEU {:.2}", s.source, s.target, s.bleu);
            }
        }
    }
    Ok(out)
}

/// Re-scores the saved best checkpoints on the test splits.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let tree = config.load_tree()?;
    let datasets = load_datasets(config, &config.training_tasks())?;
    let mut out = String::new();
    for &scheme in &config.schemes {
        let mut found = false;
        for seed in config.seeds() {
            let dir = run_dir(&config.out, scheme, seed);
            let ckpt = dir.join(CHECKPOINT_FILE);
            if !ckpt.exists() {
                continue;
            }
            found = true;
            let mut p = prepare(&tree, &datasets, &config.train_config(scheme, seed), config.min_count)?;
            let saved = checkpoint::load(&ckpt).map_err(|e| ExperimentError::Config(format!("{}: {e}", ckpt.display())))?;
            p.store.params.load_values(&saved);
            let scored = score_tasks(&p, scheme, seed, config.eval_batch, config.smoothing)?;
            let reports: Vec<_> = scored.iter().map(|(_, r)| r.clone()).collect();
            write_file(&dir.join("evaluation.json"), &serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
            for (s, r) in &scored {
                let _ = writeln!(
                    out,
                    "{scheme} seed {seed} {}-{}: BLEU {:.2} (p1..p4 {:.3} {:.3} {:.3} {:.3}, BP {:.3})",
                    s.source, s.target, r.bleu, r.precisions[0], r.precisions[1], r.precisions[2], r.precisions[3], r.brevity_penalty
                );
            }
        }
        if !found {
            return Err(ExperimentError::MissingRuns(scheme));
        }
    }
    Ok(out)
}

/// Builds every analysis table from the finished runs under the config's
/// output directory and writes them to `<out>/report/`.
pub fn cmd_report(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let tree = config.load_tree()?;
    let results = collect_results(&config.out).unwrap_or_default();
    let scores: Vec<TaskScore> = results
        .iter()
        .filter(|r| config.schemes.contains(&r.scheme))
        .flat_map(|r| r.scores.clone())
        .collect();
    for &s in &config.schemes {
        if !scores.iter().any(|x| x.scheme == s) {
            return Err(ExperimentError::MissingRuns(s));
        }
    }
    let dir = config.out.join("report");
    let summary = language_summary(&scores);
    let by_size = group_by_size(&scores, &config.size_edges);
    let by_sim = group_by_similarity(&scores, &tree)?;
    write_file(&dir.join("language_summary.csv"), &summary.to_csv())?;
    write_file(&dir.join("by_size.csv"), &by_size.to_csv())?;
    write_file(&dir.join("by_similarity.csv"), &by_sim.to_csv())?;
    for &s in &config.schemes {
        write_file(&dir.join(format!("histogram_{s}.csv")), &histogram_csv(&histogram(&scores, s, 5.0)))?;
    }
    let mut out = String::new();
    for (title, t) in [
        ("BLEU by source language", &summary),
        ("BLEU by training pairs", &by_size),
        ("BLEU by similarity", &by_sim),
    ] {
        let _ = writeln!(out, "{title}\n{}", t.to_pretty());
    }
    let mut tests = Vec::new();
    let schemes: Vec<Scheme> = Scheme::ALL.into_iter().filter(|s| config.schemes.contains(s)).collect();
    for (i, a) in schemes.iter().enumerate() {
        for b in &schemes[i + 1..] {
            match paired_t_test(&scores, *a, *b) {
                Ok(t) => {
                    let _ = writeln!(out, "{}", t.summary());
                    tests.push(t);
                }
                Err(e) => {
                    let _ = writeln!(out, "paired t-test {b} vs {a}: {e}");
                }
            }
        }
    }
    write_file(&dir.join("t_tests.json"), &serde_json::to_string_pretty(&tests).expect("tests serialize"))?;
    let _ = writeln!(out, "tables written to {}", dir.display());
    Ok(out)
}
