//! Low-resource transfer experiment at desk scale.
//!
//! Two families with two languages each. A low-resource task between
//! siblings (`aa → ab`) is trained jointly with a high-resource task from
//! the other family into the same target (`ba → ab`). HNMT trains both
//! tasks in one run; the many-to-many baseline trains each task on its own.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::pipeline::{prepare, score_tasks};
use super::ExperimentError;
use crate::data::{generate_synthetic, SynthSpec, SynthTask, TaskDataset};
use crate::evaluation::{group_by_similarity, AnalysisTable, Smoothing, TaskScore};
use crate::langtree::{parse_tree, LanguageTree};
use crate::model::Scheme;
use crate::training::{train, TrainConfig};

pub const TRANSFER_TREE_JSON: &str = include_str!("../../data/transfer_tree.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSetup {
    pub low: SynthTask,
    pub high: SynthTask,
    pub synth: SynthSpec,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub eval_batch: usize,
}

impl Default for TransferSetup {
    fn default() -> Self {
        let task = |s: &str, t: &str, pairs| SynthTask {
            source: s.into(),
            target: t.into(),
            pairs,
        };
        // 715 and 7143 pairs leave 500 and 5000 after the 70% train cut.
        let low = task("aa", "ab", 715);
        let high = task("ba", "ab", 7143);
        TransferSetup {
            synth: SynthSpec {
                seed: 5,
                base_vocab: 40,
                min_len: 3,
                max_len: 6,
                family_substitution: 0.5,
                suffix_fraction: 0.2,
                swap_fraction: 0.2,
                successors: 3,
                tasks: vec![low.clone(), high.clone()],
            },
            low,
            high,
            train: TrainConfig {
                batch: 32,
                lr: 0.01,
                layers: 4,
                hidden: 64,
                embed_dim: 32,
                max_rounds: 15,
                ..TrainConfig::default()
            },
            seeds: vec![1, 2, 3],
            eval_batch: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub scores: Vec<TaskScore>,
    pub by_similarity: AnalysisTable,
    /// Median low-resource test BLEU per scheme.
    pub median_hnmt: f64,
    pub median_baseline: f64,
    pub seconds: f64,
}

impl TransferOutcome {
    pub fn low_resource_gain(&self) -> f64 {
        self.median_hnmt - self.median_baseline
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn run_one(
    tree: &LanguageTree,
    data: &[TaskDataset],
    config: &TrainConfig,
    eval_batch: usize,
) -> Result<Vec<TaskScore>, ExperimentError> {
    let mut p = prepare(tree, data, config, 1)?;
    train(&p.tasks, config, &mut p.store)?;
    Ok(score_tasks(&p, config.scheme, config.seed, eval_batch, Smoothing::AddOne)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

/// Runs every seed under HNMT (joint) and many-to-many (each task alone).
/// `progress` receives a line per finished run.
pub fn run_transfer(setup: &TransferSetup, mut progress: impl FnMut(&str)) -> Result<TransferOutcome, ExperimentError> {
    let start = Instant::now();
    let tree = parse_tree(TRANSFER_TREE_JSON).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let data = generate_synthetic(&tree, &setup.synth)?;
    let mut scores = Vec::new();
    for &seed in &setup.seeds {
        let hnmt = TrainConfig {
            scheme: Scheme::Hnmt,
            seed,
            ..setup.train.clone()
        };
        let s = run_one(&tree, &data, &hnmt, setup.eval_batch)?;
        progress(&format!("seed {seed} hnmt: {}", fmt_scores(&s)));
        scores.extend(s);
        let m2m = TrainConfig {
            scheme: Scheme::ManyToMany,
            ..hnmt
        };
        for d in &data {
            let s = run_one(&tree, std::slice::from_ref(d), &m2m, setup.eval_batch)?;
            progress(&format!("seed {seed} many-to-many alone: {}", fmt_scores(&s)));
            scores.extend(s);
        }
    }
    let low = |scheme| {
        let mut v: Vec<f64> = scores
            .iter()
            .filter(|s| s.scheme == scheme && s.source == setup.low.source && s.target == setup.low.target)
            .map(|s| s.bleu)
            .collect();
        median(&mut v)
    };
    Ok(TransferOutcome {
        by_similarity: group_by_similarity(&scores, &tree)?,
        median_hnmt: low(Scheme::Hnmt),
        median_baseline: low(Scheme::ManyToMany),
        scores,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn fmt_scores(s: &[TaskScore]) -> String {
    s.iter()
        .map(|x| format!("{}-{} {:.2}", x.source, x.target, x.bleu))
        .collect::<Vec<_>>()
        .join(", ")
}
