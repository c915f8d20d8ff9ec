pub mod corpus;
pub mod embeddings;
pub mod synth;
pub mod vocab;

pub use corpus::{
    corpus_paths, encode_pair, load_parallel, parse_parallel, split, split_seed, split_sizes, tokenize, write_parallel, IdPair,
    TaskDataset, TextPair,
};
pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingTable};
pub use synth::{generate_pairs, generate_synthetic, token_overlap, SynthSpec, SynthTask, Synthesizer};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, PAD, UNK};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("corpus misaligned: {source_lines} source lines vs {target_lines} target lines")]
    Alignment { source_lines: usize, target_lines: usize },
    #[error("dataset too small: {pairs} pairs, need at least {minimum}")]
    TooSmall { pairs: usize, minimum: usize },
    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
}
