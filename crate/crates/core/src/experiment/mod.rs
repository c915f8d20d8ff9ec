//! Config-driven experiment runner behind the `hnmt` command.

mod commands;
mod config;
mod pipeline;
pub mod transfer;

pub mod cli;

pub use commands::{cmd_evaluate, cmd_report, cmd_routes, cmd_synth, cmd_train, cmd_tree, TreeOp};
pub use config::{ExperimentConfig, Overrides, TaskRef, SAMPLE_TREE};
pub use pipeline::{
    apply_embeddings, build_vocabs, collect_results, ensure_corpora, load_datasets, load_dev, log_lines, prepare, run_dir,
    run_training, score_tasks, write_file, write_synthetic, Prepared, RunResult, CHECKPOINT_FILE, LOG_FILE, RESULTS_FILE,
};

use crate::data::DataError;
use crate::evaluation::EvalError;
use crate::model::{ModelError, Scheme};
use crate::training::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("{0}; try a lower --lr or a smaller --batch")]
    Diverged(TrainError),
    #[error("no finished runs for scheme {0}; run `hnmt train --scheme {0}` first")]
    MissingRuns(Scheme),
    #[error(transparent)]
    Train(TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<TrainError> for ExperimentError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => ExperimentError::Diverged(e),
            TrainError::Config(m) => ExperimentError::Config(m),
            other => ExperimentError::Train(other),
        }
    }
}

impl ExperimentError {
    /// Process exit code: 2 config, 3 data, 4 numeric divergence, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) | ExperimentError::MissingRuns(_) => 3,
            ExperimentError::Diverged(_) => 4,
            _ => 1,
        }
    }
}

/// Caps the global rayon pool at `HNMT_THREADS` threads when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("HNMT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}
