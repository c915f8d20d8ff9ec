//! Argument parsing for the `hnmt` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::commands::{cmd_evaluate, cmd_report, cmd_routes, cmd_synth, cmd_train, cmd_tree, TreeOp};
use super::config::{ExperimentConfig, Overrides};
use super::ExperimentError;
use crate::langtree::{parse_tree, sample_tree};
use crate::model::Scheme;

#[derive(Debug, Parser)]
#[command(name = "hnmt", version, about = "Hierarchical multilingual translation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Train or report a single scheme.
    #[arg(long, global = true)]
    pub scheme: Option<Scheme>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Encoder and decoder depth.
    #[arg(long = "N", global = true)]
    pub layers: Option<usize>,
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long = "max-rounds", global = true)]
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeAction {
    Show,
    Prune,
    Limit,
    Duplicate,
    Preprocess,
    Similarity,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transform or query a language tree.
    Tree {
        action: TreeAction,
        /// The two languages for `similarity`.
        languages: Vec<String>,
        /// Tree file; defaults to the config's tree, then the sample tree.
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Write the resulting tree as JSON.
        #[arg(long = "dump-json")]
        dump_json: Option<PathBuf>,
    },
    /// Write the sharing manifest of each scheme.
    Routes,
    /// Generate the synthetic corpora.
    Synth,
    /// Train every configured scheme and seed.
    Train {
        /// Suppress per-round losses on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Re-score saved checkpoints on the test splits.
    Evaluate,
    /// Build the analysis tables from finished runs.
    Report,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            scheme: self.scheme,
            seed: self.seed,
            out: self.out.clone(),
            layers: self.layers,
            hidden: self.hidden,
            batch: self.batch,
            lr: self.lr,
            max_rounds: self.max_rounds,
        }
    }

    fn load(&self) -> Result<ExperimentConfig, ExperimentError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| ExperimentError::Config("this command needs --config".into()))?;
        ExperimentConfig::load(path, &self.overrides())
    }
}

impl clap::ValueEnum for Scheme {
    fn value_variants<'a>() -> &'a [Self] {
        &Scheme::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.as_str()))
    }
}

/// Runs a parsed command and returns its standard output.
pub fn run(cli: &Cli) -> Result<String, ExperimentError> {
    let g = &cli.global;
    match &cli.command {
        Command::Tree {
            action,
            languages,
            tree,
            dump_json,
        } => {
            let t = match (tree, &g.config) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(p).map_err(|e| ExperimentError::Config(format!("{}: {e}", p.display())))?;
                    parse_tree(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", p.display())))?
                }
                (None, Some(_)) => g.load()?.load_tree()?,
                (None, None) => sample_tree(),
            };
            let op = match action {
                TreeAction::Show => TreeOp::Show,
                TreeAction::Prune => TreeOp::Prune,
                TreeAction::Limit => TreeOp::Limit,
                TreeAction::Duplicate => TreeOp::Duplicate,
                TreeAction::Preprocess => TreeOp::Preprocess,
                TreeAction::Similarity => match languages.as_slice() {
                    [a, b] => TreeOp::Similarity(a.clone(), b.clone()),
                    _ => return Err(ExperimentError::Config("similarity takes exactly two languages".into())),
                },
            };
            cmd_tree(&t, &op, g.layers, dump_json.as_deref())
        }
        Command::Routes => cmd_routes(&g.load()?),
        Command::Synth => cmd_synth(&g.load()?),
        Command::Train { quiet } => {
            let quiet = *quiet;
            cmd_train(&g.load()?, |scheme, seed, st| {
                if !quiet {
                    eprintln!(
                        "[{scheme} seed {seed}] round {}: train {:.4} val {:.4}",
                        st.round,
                        st.history.last().copied().unwrap_or(f64::NAN),
                        st.val_history.last().copied().unwrap_or(f64::NAN)
                    );
                }
            })
        }
        Command::Evaluate => cmd_evaluate(&g.load()?),
        Command::Report => cmd_report(&g.load()?),
    }
}
