use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::data::SynthSpec;
use crate::evaluation::{Smoothing, DEFAULT_SIZE_EDGES};
use crate::langtree::{parse_tree, sample_tree, LanguageTree};
use crate::model::Scheme;
use crate::training::TrainConfig;

/// Tree path value that selects the shipped sample tree.
pub const SAMPLE_TREE: &str = "builtin:sample";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskRef {
    pub source: String,
    pub target: String,
}

impl TaskRef {
    pub fn label(&self) -> String {
        crate::model::task_label(&self.source, &self.target)
    }
}

/// One experiment: data, schemes, seeds and hyper-parameters. Relative
/// paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub tree: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Training seeds; defaults to `[seed]`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    pub out: PathBuf,
    /// Where `<task>.<lang>` corpus files live; defaults to `<out>/corpus`.
    #[serde(default)]
    pub corpus_dir: Option<PathBuf>,
    /// Corpus tasks in addition to the synthetic ones.
    #[serde(default)]
    pub tasks: Vec<TaskRef>,
    #[serde(default)]
    pub synthetic: Option<SynthSpec>,
    /// Held out from every split; only loaded on request for tuning.
    #[serde(default)]
    pub dev_tasks: Vec<TaskRef>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    /// Word2vec text files per language.
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
    #[serde(default = "default_true")]
    pub embedding_fallback: bool,
    #[serde(default)]
    pub smoothing: Smoothing,
    #[serde(default = "default_edges")]
    pub size_edges: Vec<usize>,
    #[serde(default = "default_eval_batch")]
    pub eval_batch: usize,
}

fn default_seed() -> u64 {
    1
}
fn default_min_count() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_edges() -> Vec<usize> {
    DEFAULT_SIZE_EDGES.to_vec()
}
fn default_eval_batch() -> usize {
    64
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scheme: Option<Scheme>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub max_rounds: Option<usize>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(format!("config: {e}")))
    }

    /// Reads `path`, resolves relative paths and applies `overrides`.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve_paths(base);
        c.apply(overrides);
        c.validate()?;
        Ok(c)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.tree != SAMPLE_TREE {
            self.tree = resolve(base, Path::new(&self.tree)).display().to_string();
        }
        self.out = resolve(base, &self.out);
        self.corpus_dir = self.corpus_dir.as_ref().map(|d| resolve(base, d));
        for p in self.embeddings.values_mut() {
            *p = resolve(base, p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.scheme {
            self.schemes = vec![s];
        }
        if let Some(s) = o.seed {
            self.seed = s;
            self.seeds = vec![s];
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        let t = &mut self.train;
        t.layers = o.layers.unwrap_or(t.layers);
        t.hidden = o.hidden.unwrap_or(t.hidden);
        t.batch = o.batch.unwrap_or(t.batch);
        t.lr = o.lr.unwrap_or(t.lr);
        t.max_rounds = o.max_rounds.unwrap_or(t.max_rounds);
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.schemes.is_empty() {
            return bad("scheme list is empty".into());
        }
        if self.tree != SAMPLE_TREE && !Path::new(&self.tree).exists() {
            return bad(format!("tree file {} does not exist", self.tree));
        }
        if !self.embedding_fallback {
            for (l, p) in &self.embeddings {
                if !p.exists() {
                    return bad(format!("embedding file for {l} ({}) does not exist", p.display()));
                }
            }
        }
        if self.min_count == 0 || self.eval_batch == 0 {
            return bad("min_count and eval_batch must be positive".into());
        }
        if self.training_tasks().is_empty() {
            return bad("no training tasks".into());
        }
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus_dir.clone().unwrap_or_else(|| self.out.join("corpus"))
    }

    /// Every declared task, dev tasks included, in lexicographic order.
    pub fn all_tasks(&self) -> Vec<TaskRef> {
        let mut v: Vec<TaskRef> = self.tasks.clone();
        if let Some(s) = &self.synthetic {
            v.extend(s.tasks.iter().map(|t| TaskRef {
                source: t.source.clone(),
                target: t.target.clone(),
            }));
        }
        v.sort();
        v.dedup();
        v
    }

    pub fn training_tasks(&self) -> Vec<TaskRef> {
        self.all_tasks().into_iter().filter(|t| !self.dev_tasks.contains(t)).collect()
    }

    pub fn load_tree(&self) -> Result<LanguageTree, ExperimentError> {
        if self.tree == SAMPLE_TREE {
            return Ok(sample_tree());
        }
        let text = std::fs::read_to_string(&self.tree).map_err(|e| ExperimentError::Config(format!("{}: {e}", self.tree)))?;
        parse_tree(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", self.tree)))
    }

    /// Training config of one run.
    pub fn train_config(&self, scheme: Scheme, seed: u64) -> TrainConfig {
        TrainConfig {
            scheme,
            seed,
            ..self.train.clone()
        }
    }
}
