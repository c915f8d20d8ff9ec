//! Toy languages rendered from a family tree.
//!
//! A latent meaning sequence (a Markov chain over `base_vocab` meanings) is
//! rendered into each language by walking its family chain from the root:
//! the top-level family relabels every meaning with its own token table,
//! deeper families relabel a subset, and the leaf marks some tokens with a
//! suffix and swaps some adjacent tokens. Languages with more ancestors in
//! common therefore share more surface tokens.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{split, split_seed, TaskDataset, TextPair};
use super::DataError;
use crate::langtree::{slug, LanguageTree};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthTask {
    pub source: String,
    pub target: String,
    pub pairs: usize,
}

/// Generator settings. The tree is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub base_vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Fraction of meanings relabelled by families below the top level.
    #[serde(default = "default_family_substitution")]
    pub family_substitution: f64,
    #[serde(default = "default_suffix")]
    pub suffix_fraction: f64,
    #[serde(default = "default_swap")]
    pub swap_fraction: f64,
    /// Out-degree of the meaning Markov chain.
    #[serde(default = "default_successors")]
    pub successors: usize,
    pub tasks: Vec<SynthTask>,
}

fn default_family_substitution() -> f64 {
    0.5
}
fn default_suffix() -> f64 {
    0.2
}
fn default_swap() -> f64 {
    0.2
}
fn default_successors() -> usize {
    4
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::Spec(e.to_string()))
    }

    fn validate(&self, tree: &LanguageTree) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Spec(m));
        if self.base_vocab == 0 {
            return bad("base_vocab must be positive".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("invalid length range {}..={}", self.min_len, self.max_len));
        }
        if self.successors == 0 {
            return bad("successors must be positive".into());
        }
        for f in [self.family_substitution, self.suffix_fraction, self.swap_fraction] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("fraction {f} outside [0, 1]"));
            }
        }
        for t in &self.tasks {
            if t.pairs == 0 {
                return bad(format!("task {}-{} has no pairs", t.source, t.target));
            }
            for l in [&t.source, &t.target] {
                if !tree.contains(l) {
                    return bad(format!("unknown language {l:?}"));
                }
            }
        }
        Ok(())
    }
}

/// Per-language renderer with precomputed token tables.
#[derive(Debug, Clone)]
struct Lexicon {
    words: Vec<String>,
    swaps: Vec<bool>,
}

impl Lexicon {
    fn render(&self, meanings: &[usize]) -> Vec<String> {
        let mut out: Vec<String> = meanings.iter().map(|m| self.words[*m].clone()).collect();
        let mut i = 0;
        while i + 1 < out.len() {
            if self.swaps[meanings[i]] {
                out.swap(i, i + 1);
                i += 2;
            } else {
                i += 1;
            }
        }
        out
    }
}

struct Relabel {
    tag: String,
    perm: Vec<usize>,
    applies: Vec<bool>,
}

pub struct Synthesizer<'a> {
    tree: &'a LanguageTree,
    spec: SynthSpec,
    successors: Vec<Vec<usize>>,
    lexicons: HashMap<String, Lexicon>,
}

impl<'a> Synthesizer<'a> {
    pub fn new(tree: &'a LanguageTree, spec: &SynthSpec) -> Result<Self, DataError> {
        spec.validate(tree)?;
        let v = spec.base_vocab;
        let mut rng = seed::rng(spec.seed, "markov");
        let successors = (0..v)
            .map(|_| (0..spec.successors).map(|_| rng.random_range(0..v)).collect())
            .collect();
        let mut s = Synthesizer {
            tree,
            spec: spec.clone(),
            successors,
            lexicons: HashMap::new(),
        };
        let langs: Vec<String> = tree.languages().map(String::from).collect();
        for l in langs {
            let lex = s.lexicon(&l);
            s.lexicons.insert(l, lex);
        }
        Ok(s)
    }

    fn relabel(&self, node_id: &str, tag: String, fraction: f64) -> Relabel {
        let v = self.spec.base_vocab;
        let mut rng = seed::rng(self.spec.seed, &format!("family/{node_id}"));
        let mut perm: Vec<usize> = (0..v).collect();
        perm.shuffle(&mut rng);
        let applies = (0..v).map(|_| rng.random_bool(fraction)).collect();
        Relabel { tag, perm, applies }
    }

    fn lexicon(&self, language: &str) -> Lexicon {
        let v = self.spec.base_vocab;
        let entry = self.tree.entry(language).expect("validated");
        let mut steps = Vec::new();
        if entry.chain.is_empty() {
            // A language without families still gets its own token table.
            steps.push(self.relabel(&entry.leaf_id, slug(language), 1.0));
        }
        for (depth, id) in entry.chain.iter().enumerate() {
            let name = self.tree.find(id).map(|n| n.name.as_str()).unwrap_or(id);
            let fraction = if depth == 0 { 1.0 } else { self.spec.family_substitution };
            steps.push(self.relabel(id, slug(name), fraction));
        }
        let mut rng = seed::rng(self.spec.seed, &format!("leaf/{}", entry.leaf_id));
        let suffix: Vec<bool> = (0..v).map(|_| rng.random_bool(self.spec.suffix_fraction)).collect();
        let swaps = (0..v).map(|_| rng.random_bool(self.spec.swap_fraction)).collect();
        let lang_tag = slug(language);
        let words = (0..v)
            .map(|m| {
                let (mut tag, mut idx) = ("w", m);
                for s in &steps {
                    if s.applies[m] {
                        tag = &s.tag;
                        idx = s.perm[idx];
                    }
                }
                if suffix[m] {
                    format!("{tag}{idx}-{lang_tag}")
                } else {
                    format!("{tag}{idx}")
                }
            })
            .collect();
        Lexicon { words, swaps }
    }

    fn meanings(&self, label: &str, count: usize) -> Vec<Vec<usize>> {
        let mut rng = seed::rng(self.spec.seed, &format!("meanings/{label}"));
        let v = self.spec.base_vocab;
        (0..count)
            .map(|_| {
                let len = rng.random_range(self.spec.min_len..=self.spec.max_len);
                let mut m = vec![rng.random_range(0..v)];
                while m.len() < len {
                    let next = &self.successors[*m.last().expect("non-empty")];
                    m.push(next[rng.random_range(0..next.len())]);
                }
                m
            })
            .collect()
    }

    pub fn render(&self, language: &str, meanings: &[usize]) -> Vec<String> {
        self.lexicons[language].render(meanings)
    }

    /// `count` parallel pairs for `src → tgt`. The meanings depend only on
    /// the unordered pair, so `b → a` with the same count is the mirror of
    /// `a → b`.
    pub fn pairs(&self, src: &str, tgt: &str, count: usize) -> Vec<TextPair> {
        let (x, y) = if src <= tgt { (src, tgt) } else { (tgt, src) };
        self.meanings(&format!("{x}|{y}|{count}"), count)
            .iter()
            .map(|m| TextPair {
                source: self.render(src, m),
                target: self.render(tgt, m),
            })
            .collect()
    }
}

/// Raw pairs for every task of `spec`, in spec order.
pub fn generate_pairs(tree: &LanguageTree, spec: &SynthSpec) -> Result<Vec<(SynthTask, Vec<TextPair>)>, DataError> {
    let s = Synthesizer::new(tree, spec)?;
    Ok(spec
        .tasks
        .iter()
        .map(|t| (t.clone(), s.pairs(&t.source, &t.target, t.pairs)))
        .collect())
}

/// Generates and splits every task of `spec`.
pub fn generate_synthetic(tree: &LanguageTree, spec: &SynthSpec) -> Result<Vec<TaskDataset>, DataError> {
    generate_pairs(tree, spec)?
        .into_iter()
        .map(|(t, p)| split(&t.source, &t.target, p, split_seed(spec.seed, &t.source, &t.target)))
        .collect()
}

/// Mean over pairs of the multiset token intersection divided by the longer
/// side's length.
pub fn token_overlap(pairs: &[TextPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| {
            let mut counts: HashMap<&str, isize> = HashMap::new();
            for t in &p.source {
                *counts.entry(t).or_default() += 1;
            }
            let mut common = 0usize;
            for t in &p.target {
                if let Some(c) = counts.get_mut(t.as_str()) {
                    if *c > 0 {
                        *c -= 1;
                        common += 1;
                    }
                }
            }
            let longer = p.source.len().max(p.target.len());
            if longer == 0 {
                1.0
            } else {
                common as f64 / longer as f64
            }
        })
        .sum();
    sum / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langtree::{sample_tree, similarity};

    fn spec(tasks: &[(&str, &str)]) -> SynthSpec {
        SynthSpec {
            seed: 11,
            base_vocab: 60,
            min_len: 4,
            max_len: 9,
            family_substitution: 0.5,
            suffix_fraction: 0.2,
            swap_fraction: 0.2,
            successors: 4,
            tasks: tasks
                .iter()
                .map(|(s, t)| SynthTask {
                    source: s.to_string(),
                    target: t.to_string(),
                    pairs: 200,
                })
                .collect(),
        }
    }

    #[test]
    fn identity_leaves_make_siblings_identical() {
        let tree = sample_tree();
        let mut sp = spec(&[("en", "de")]);
        sp.suffix_fraction = 0.0;
        sp.swap_fraction = 0.0;
        let out = generate_pairs(&tree, &sp).unwrap();
        assert!(out[0].1.iter().all(|p| p.source == p.target));
        assert_eq!(token_overlap(&out[0].1), 1.0);
    }

    #[test]
    fn cross_family_overlap_is_tiny() {
        let tree = sample_tree();
        let out = generate_pairs(&tree, &spec(&[("en", "fi"), ("es", "hu")])).unwrap();
        for (_, p) in &out {
            assert!(token_overlap(p) < 0.05);
        }
    }

    #[test]
    fn overlap_grows_with_similarity() {
        let tree = sample_tree();
        let langs: Vec<&str> = tree.languages().collect();
        let mut tasks = Vec::new();
        for a in &langs {
            for b in &langs {
                if a < b {
                    tasks.push((*a, *b));
                }
            }
        }
        let out = generate_pairs(&tree, &spec(&tasks)).unwrap();
        let mut by_sim: Vec<Vec<f64>> = vec![Vec::new(); 3];
        for (t, p) in &out {
            by_sim[similarity(&tree, &t.source, &t.target).unwrap()].push(token_overlap(p));
        }
        let means: Vec<f64> = by_sim.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
        assert!(means[0] <= means[1] && means[1] <= means[2], "{means:?}");
    }

    #[test]
    fn deterministic_and_mirrored() {
        let tree = sample_tree();
        let sp = spec(&[("es", "pt"), ("pt", "es")]);
        let a = generate_pairs(&tree, &sp).unwrap();
        assert_eq!(a, generate_pairs(&tree, &sp).unwrap());
        for (x, y) in a[0].1.iter().zip(&a[1].1) {
            assert_eq!(x.source, y.target);
        }
        let ds = generate_synthetic(&tree, &sp).unwrap();
        assert_eq!(ds[0].reversed(), ds[1]);
    }

    #[test]
    fn rejects_bad_spec() {
        let tree = sample_tree();
        let mut sp = spec(&[("es", "xx")]);
        assert!(generate_pairs(&tree, &sp).is_err());
        sp.tasks.clear();
        sp.min_len = 0;
        assert!(generate_pairs(&tree, &sp).is_err());
    }
}
