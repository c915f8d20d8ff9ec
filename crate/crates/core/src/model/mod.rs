//! Hierarchical encoder-decoder: route compilation for every sharing
//! scheme, the parameter registry, and batched sequence encode/decode.

mod route;
mod seq2seq;
mod store;

pub use route::{compile_route, task_label, LayerKey, ManifestTask, RouteManifest, RoutePlan, Scheme, Side};
pub use seq2seq::{argmax, default_max_len, Seq2Seq};
pub use store::{DecoderInit, EmbeddingParams, LayerParams, ModelDims, OutputParams, ParameterStore};

use crate::langtree::TreeError;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("unknown scheme `{0}` (expected hnmt, many-to-many, one-to-many, many-to-one or one-to-one)")]
    UnknownScheme(String),
    #[error("invalid layer count {0}")]
    InvalidLayers(usize),
    #[error("language `{language}` has {families} families but the route needs {expected}; preprocess the tree for this layer count")]
    PreprocessingMismatch {
        language: String,
        families: usize,
        expected: usize,
    },
    #[error("layer `{0}` is not registered")]
    MissingLayer(String),
    #[error("token id {id} outside vocabulary of {vocab}")]
    OutOfVocabulary { id: usize, vocab: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("sentence vectors of shape {got:?} for a batch of {expected}")]
    BatchMismatch { expected: usize, got: Vec<usize> },
}
