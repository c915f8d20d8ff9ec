use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use super::vocab::Vocabulary;
use super::DataError;
use crate::seed;

/// One vector per vocabulary id. Rows without a pretrained vector are
/// drawn uniformly from ±0.1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub language: String,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    /// Whether row `i` came from the file.
    pub covered: Vec<bool>,
}

impl EmbeddingTable {
    /// Fraction of regular vocabulary tokens found in the file.
    pub fn coverage(&self, vocab: &Vocabulary) -> f64 {
        let start = vocab.first_regular();
        let total = vocab.len() - start;
        if total == 0 {
            return 0.0;
        }
        self.covered[start..].iter().filter(|c| **c).count() as f64 / total as f64
    }

    /// `(id, vector)` rows that came from the file.
    pub fn covered_rows(&self) -> Vec<(usize, Vec<f64>)> {
        self.vectors
            .iter()
            .enumerate()
            .filter(|(i, _)| self.covered[*i])
            .map(|(i, v)| (i, v.clone()))
            .collect()
    }
}

fn random_table(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = seed::rng(seed, &format!("embeddings/{}", vocab.language));
    EmbeddingTable {
        language: vocab.language.clone(),
        dim,
        vectors: (0..vocab.len())
            .map(|_| (0..dim).map(|_| rng.random_range(-0.1..0.1)).collect())
            .collect(),
        covered: vec![false; vocab.len()],
    }
}

/// Parses word2vec text: an optional `count dim` header, then
/// `token v1 … vd` per line. Every vector must have `dim` components.
pub fn parse_embeddings(text: &str, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable, DataError> {
    let mut found: HashMap<&str, Vec<f64>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if lineno == 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            let header_dim: usize = fields[1].parse().expect("checked");
            if header_dim != dim {
                return Err(DataError::EmbeddingFormat {
                    line: lineno,
                    message: format!("header dimension {header_dim}, expected {dim}"),
                });
            }
            continue;
        }
        let values: Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        let values = values.map_err(|e| DataError::EmbeddingFormat {
            line: lineno,
            message: e.to_string(),
        })?;
        if values.len() != dim {
            return Err(DataError::EmbeddingFormat {
                line: lineno,
                message: format!("{} components, expected {dim}", values.len()),
            });
        }
        found.insert(fields[0], values);
    }
    let mut table = random_table(vocab, dim, seed);
    for id in vocab.first_regular()..vocab.len() {
        let tok = vocab.token(id).expect("in range");
        if let Some(v) = found.remove(tok) {
            table.vectors[id] = v;
            table.covered[id] = true;
        }
    }
    Ok(table)
}

/// Loads embeddings for `vocab`. With `fallback`, a missing file yields a
/// fully random table of dimension `dim`.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize, seed: u64, fallback: bool) -> Result<EmbeddingTable, DataError> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_embeddings(&text, vocab, dim, seed),
        Err(e) if fallback && e.kind() == std::io::ErrorKind::NotFound => Ok(random_table(vocab, dim, seed)),
        Err(e) => Err(DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
    }
}
