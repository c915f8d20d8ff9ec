use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, BOS, EOS};
use super::DataError;
use crate::seed;

/// A whitespace-tokenized sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TextPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl TextPair {
    pub fn new(source: &str, target: &str) -> Self {
        TextPair {
            source: tokenize(source),
            target: tokenize(target),
        }
    }
}

/// A pair of id sequences ready for the model. The target is wrapped in
/// BOS/EOS; the source carries the target-language token when required.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdPair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(String::from).collect()
}

/// Train/validation/test sentence pairs of one language pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDataset<P = TextPair> {
    pub source_lang: String,
    pub target_lang: String,
    pub train: Vec<P>,
    pub validation: Vec<P>,
    pub test: Vec<P>,
}

impl<P> TaskDataset<P> {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn label(&self) -> String {
        crate::model::task_label(&self.source_lang, &self.target_lang)
    }
}

impl TaskDataset<TextPair> {
    /// The reverse direction over the same split.
    pub fn reversed(&self) -> Self {
        let flip = |v: &[TextPair]| {
            v.iter()
                .map(|p| TextPair {
                    source: p.target.clone(),
                    target: p.source.clone(),
                })
                .collect()
        };
        TaskDataset {
            source_lang: self.target_lang.clone(),
            target_lang: self.source_lang.clone(),
            train: flip(&self.train),
            validation: flip(&self.validation),
            test: flip(&self.test),
        }
    }

    /// Maps every split to ids. `target_token` is prepended to each source.
    pub fn encode(&self, src: &Vocabulary, tgt: &Vocabulary, target_token: Option<usize>) -> TaskDataset<IdPair> {
        let enc = |v: &[TextPair]| v.iter().map(|p| encode_pair(p, src, tgt, target_token)).collect();
        TaskDataset {
            source_lang: self.source_lang.clone(),
            target_lang: self.target_lang.clone(),
            train: enc(&self.train),
            validation: enc(&self.validation),
            test: enc(&self.test),
        }
    }
}

pub fn encode_pair(p: &TextPair, src: &Vocabulary, tgt: &Vocabulary, target_token: Option<usize>) -> IdPair {
    let mut source: Vec<usize> = target_token.into_iter().collect();
    source.extend(src.encode(&p.source));
    let mut target = vec![BOS];
    target.extend(tgt.encode(&p.target));
    target.push(EOS);
    IdPair { source, target }
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Pairs lines of two aligned texts. A pair is dropped when either side is
/// blank.
pub fn parse_parallel(source: &str, target: &str) -> Result<Vec<TextPair>, DataError> {
    let s: Vec<&str> = source.lines().collect();
    let t: Vec<&str> = target.lines().collect();
    if s.len() != t.len() {
        return Err(DataError::Alignment {
            source_lines: s.len(),
            target_lines: t.len(),
        });
    }
    Ok(s.iter()
        .zip(&t)
        .map(|(a, b)| TextPair::new(a, b))
        .filter(|p| !p.source.is_empty() && !p.target.is_empty())
        .collect())
}

pub fn load_parallel(source: &Path, target: &Path) -> Result<Vec<TextPair>, DataError> {
    parse_parallel(&read(source)?, &read(target)?)
}

/// File names of a task's corpus: `<task>.<src>` and `<task>.<tgt>`.
pub fn corpus_paths(dir: &Path, task: &str, src: &str, tgt: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{task}.{src}")), dir.join(format!("{task}.{tgt}")))
}

pub fn write_parallel(dir: &Path, task: &str, src: &str, tgt: &str, pairs: &[TextPair]) -> Result<(PathBuf, PathBuf), DataError> {
    let (sp, tp) = corpus_paths(dir, task, src, tgt);
    let join = |side: fn(&TextPair) -> &Vec<String>| {
        let mut out = String::new();
        for p in pairs {
            out.push_str(&side(p).join(" "));
            out.push('\n');
        }
        out
    };
    fs::create_dir_all(dir).map_err(|e| DataError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    for (path, text) in [(&sp, join(|p| &p.source)), (&tp, join(|p| &p.target))] {
        fs::write(path, text).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok((sp, tp))
}

pub const MIN_SPLIT_PAIRS: usize = 10;

/// Split sizes for `n` pairs: floor 70% train, floor 10% validation, rest test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 7 / 10;
    let val = n / 10;
    (train, val, n - train - val)
}

/// Seed of a language pair's split. Both directions get the same value, so
/// the two directions of one corpus never trade test pairs for train pairs.
pub fn split_seed(root: u64, a: &str, b: &str) -> u64 {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    seed::derive(root, &format!("split/{x}|{y}"))
}

/// Shuffles `pairs` with `seed` and cuts them 70/10/20.
pub fn split(source_lang: &str, target_lang: &str, mut pairs: Vec<TextPair>, seed: u64) -> Result<TaskDataset, DataError> {
    if pairs.len() < MIN_SPLIT_PAIRS {
        return Err(DataError::TooSmall {
            pairs: pairs.len(),
            minimum: MIN_SPLIT_PAIRS,
        });
    }
    let mut rng = seed::rng(seed, "shuffle");
    pairs.shuffle(&mut rng);
    let (train, val, _) = split_sizes(pairs.len());
    let test = pairs.split_off(train + val);
    let validation = pairs.split_off(train);
    Ok(TaskDataset {
        source_lang: source_lang.to_string(),
        target_lang: target_lang.to_string(),
        train: pairs,
        validation,
        test,
    })
}
