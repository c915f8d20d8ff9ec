//! BLEU scoring, greedy test-set translation, and the grouped analysis
//! reports.

mod analysis;
mod bleu;
mod translate;

pub use analysis::{
    group_by_similarity, group_by_size, histogram, histogram_csv, language_summary, paired_t_test, size_bucket, AnalysisRow,
    AnalysisTable, PairedTTest, TaskScore, DEFAULT_SIZE_EDGES, OVERALL_ROW,
};
pub use bleu::{bleu, BleuReport, Smoothing, MAX_ORDER};
pub use translate::{score_task, translate};

use crate::langtree::TreeError;
use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("{candidates} candidates for {references} references")]
    CountMismatch { candidates: usize, references: usize },
    #[error("paired t-test needs at least 2 matched tasks, got {0}")]
    TooFewPairs(usize),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
