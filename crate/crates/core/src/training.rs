//! Round-robin multi-task training: one epoch of every task per round, Adam
//! updates on each task's route, early stopping on the cross-task average
//! training loss, and model selection on validation loss.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{IdPair, TaskDataset, PAD};
use crate::model::{DecoderInit, ModelDims, ModelError, ParameterStore, RoutePlan, Scheme, Seq2Seq};
use crate::numerics::{clip_grad_norm, AdamConfig, AdamState, NumericsError, ParamSet, Tape};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch: usize,
    pub lr: f64,
    pub layers: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub patience: usize,
    pub max_rounds: usize,
    /// Global gradient-norm bound per update; `None` disables clipping.
    pub clip: Option<f64>,
    pub decoder_init: DecoderInit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 768,
            lr: 0.01,
            layers: 5,
            hidden: 512,
            embed_dim: 300,
            scheme: Scheme::Hnmt,
            seed: 1,
            patience: 10,
            max_rounds: 200,
            clip: Some(5.0),
            decoder_init: DecoderInit::AllLayers,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("batch", self.batch),
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("embed_dim", self.embed_dim),
            ("patience", self.patience),
            ("max_rounds", self.max_rounds),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TrainError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.scheme == Scheme::Hnmt && self.layers < 3 {
            return Err(TrainError::Config(format!("hnmt needs at least 3 layers, got {}", self.layers)));
        }
        Ok(())
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            decoder_init: self.decoder_init,
            ..ModelDims::new(self.hidden, self.embed_dim, self.layers)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no tasks to train")]
    NoTasks,
    #[error("task {task} has no training pairs")]
    EmptyTask { task: String },
    #[error("training diverged in round {round}, task {task}, batch {batch}: loss {loss}")]
    Diverged {
        round: usize,
        task: String,
        batch: usize,
        loss: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<NumericsError> for TrainError {
    fn from(e: NumericsError) -> Self {
        TrainError::Model(e.into())
    }
}

/// One language pair with its compiled route and id-encoded splits.
#[derive(Debug, Clone)]
pub struct TrainTask {
    pub route: RoutePlan,
    pub data: TaskDataset<IdPair>,
}

impl TrainTask {
    pub fn label(&self) -> String {
        self.route.task_label()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub round: usize,
    pub task: String,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct BestCheckpoint {
    /// 1-based round the snapshot was taken after.
    pub round: usize,
    pub val_loss: f64,
    pub params: ParamSet,
}

#[derive(Debug, Clone, Default)]
pub struct TrainState {
    pub round: usize,
    /// Mean train loss of each task's most recent epoch.
    pub task_losses: BTreeMap<String, f64>,
    /// Average train loss across tasks, one entry per round.
    pub history: Vec<f64>,
    /// Average validation loss across tasks, one entry per round.
    pub val_history: Vec<f64>,
    pub best: Option<BestCheckpoint>,
    pub log: Vec<LogRecord>,
    /// Gradient norm each parameter received during each task's most
    /// recent epoch, summed over batches.
    pub attribution: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Tasks in the fixed round-robin order: lexicographic by (source, target).
pub fn order_tasks(tasks: &mut [TrainTask]) {
    tasks.sort_by(|a, b| (&a.route.source, &a.route.target).cmp(&(&b.route.source, &b.route.target)));
}

fn split_batch(batch: &[&IdPair]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    batch.iter().map(|p| (p.source.clone(), p.target.clone())).unzip()
}

fn target_tokens(ys: &[Vec<usize>]) -> usize {
    ys.iter().map(|y| y[1..].iter().filter(|t| **t != PAD).count()).sum()
}

/// One epoch of `task`. Returns the token-weighted mean training loss.
pub fn train_epoch(
    task: &TrainTask,
    round: usize,
    config: &TrainConfig,
    store: &mut ParameterStore,
    adam: &mut AdamState,
    attribution: &mut BTreeMap<String, f64>,
) -> Result<f64, TrainError> {
    let label = task.label();
    if task.data.train.is_empty() {
        return Err(TrainError::EmptyTask { task: label });
    }
    let ids = store.route_params(&task.route);
    let mut order: Vec<&IdPair> = task.data.train.iter().collect();
    order.shuffle(&mut seed::rng(config.seed, &format!("batches/{label}/{round}")));
    let (mut total, mut tokens) = (0.0, 0usize);
    attribution.clear();
    for (b, chunk) in order.chunks(config.batch).enumerate() {
        let (xs, ys) = split_batch(chunk);
        let mut tape = Tape::new();
        let loss = Seq2Seq::new(store, &task.route)?.loss(&mut tape, &xs, &ys)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(TrainError::Diverged {
                round,
                task: label,
                batch: b + 1,
                loss: value,
            });
        }
        tape.backward(loss, &mut store.params)?;
        for &id in &ids {
            let p = store.params.get(id);
            let n = p.grad().map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt()).unwrap_or(0.0);
            *attribution.entry(store.params.name(id).to_string()).or_default() += n;
        }
        if let Some(c) = config.clip {
            let norm = clip_grad_norm(&mut store.params, &ids, c);
            if !norm.is_finite() {
                return Err(TrainError::Diverged {
                    round,
                    task: label,
                    batch: b + 1,
                    loss: norm,
                });
            }
        }
        adam.update(&mut store.params, &ids)?;
        let n = target_tokens(&ys);
        total += value * n as f64;
        tokens += n;
    }
    Ok(total / tokens.max(1) as f64)
}

/// Token-weighted mean cross-entropy of `pairs` without updating anything.
pub fn evaluate_loss(store: &ParameterStore, route: &RoutePlan, pairs: &[IdPair], batch: usize) -> Result<f64, TrainError> {
    let (mut total, mut tokens) = (0.0, 0usize);
    let refs: Vec<&IdPair> = pairs.iter().collect();
    for chunk in refs.chunks(batch.max(1)) {
        let (xs, ys) = split_batch(chunk);
        let mut tape = Tape::new();
        let loss = Seq2Seq::new(store, route)?.loss(&mut tape, &xs, &ys)?;
        let n = target_tokens(&ys);
        total += tape.scalar(loss) * n as f64;
        tokens += n;
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

/// Validation loss of every task, in task order. Runs tasks in parallel on
/// the current rayon pool; the result does not depend on the thread count.
pub fn validation_losses(store: &ParameterStore, tasks: &[TrainTask], batch: usize) -> Result<Vec<f64>, TrainError> {
    tasks
        .par_iter()
        .map(|t| evaluate_loss(store, &t.route, &t.data.validation, batch))
        .collect()
}

/// Runs one round: an epoch of every task in order, then validation.
pub fn round_robin_round(
    tasks: &[TrainTask],
    state: &mut TrainState,
    config: &TrainConfig,
    store: &mut ParameterStore,
    adam: &mut AdamState,
) -> Result<(), TrainError> {
    if tasks.is_empty() {
        return Err(TrainError::NoTasks);
    }
    let round = state.round + 1;
    let start = Instant::now();
    let mut losses = Vec::with_capacity(tasks.len());
    for t in tasks {
        let attr = state.attribution.entry(t.label()).or_default();
        let l = train_epoch(t, round, config, store, adam, attr)?;
        state.task_losses.insert(t.label(), l);
        losses.push(l);
    }
    let vals = validation_losses(store, tasks, config.batch)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    for ((t, l), v) in tasks.iter().zip(&losses).zip(&vals) {
        state.log.push(LogRecord {
            round,
            task: t.label(),
            train_loss: *l,
            val_loss: *v,
            wall_ms,
        });
    }
    let avg = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let val = avg(&vals);
    state.history.push(avg(&losses));
    state.val_history.push(val);
    state.round = round;
    if state.best.as_ref().is_none_or(|b| val < b.val_loss) {
        state.best = Some(BestCheckpoint {
            round,
            val_loss: val,
            params: store.params.clone(),
        });
    }
    Ok(())
}

pub const STOP_TOLERANCE: f64 = 1e-6;

/// True once the last `patience` rounds failed to improve on the best
/// earlier average training loss.
pub fn should_stop(history: &[f64], patience: usize) -> bool {
    if history.len() <= patience {
        return false;
    }
    let (earlier, recent) = history.split_at(history.len() - patience);
    let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
    min(recent) >= min(earlier) - STOP_TOLERANCE
}

/// 1-based round with the lowest validation loss; the earliest wins ties.
pub fn select_best(val_history: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in val_history.iter().enumerate() {
        if best.is_none_or(|(_, b)| *v < b) {
            best = Some((i + 1, *v));
        }
    }
    best.map(|(i, _)| i)
}

/// Outcome of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// Whether the patience rule, rather than the round cap, ended training.
    pub early_stopped: bool,
}

/// Trains until the stopping rule fires or `max_rounds` is reached, then
/// restores the best-validation parameters into `store`.
pub fn train(tasks: &[TrainTask], config: &TrainConfig, store: &mut ParameterStore) -> Result<TrainOutcome, TrainError> {
    train_with(tasks, config, store, |_| {})
}

/// [`train`] with a callback after every round.
pub fn train_with(
    tasks: &[TrainTask],
    config: &TrainConfig,
    store: &mut ParameterStore,
    mut on_round: impl FnMut(&TrainState),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if tasks.is_empty() {
        return Err(TrainError::NoTasks);
    }
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr));
    let mut state = TrainState::default();
    let mut early_stopped = false;
    while state.round < config.max_rounds {
        round_robin_round(tasks, &mut state, config, store, &mut adam)?;
        on_round(&state);
        if should_stop(&state.history, config.patience) {
            early_stopped = true;
            break;
        }
    }
    if let Some(b) = &state.best {
        store.params.load_values(&b.params);
    }
    Ok(TrainOutcome { state, early_stopped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_rule_examples() {
        let dec: Vec<f64> = (0..30).map(|i| 30.0 - i as f64).collect();
        assert!(!should_stop(&dec, 10));
        let mut flat = vec![3.0, 2.0, 1.0];
        flat.extend([1.0; 11]);
        assert!(should_stop(&flat, 10));
        let mut h = vec![1.0, 0.5];
        h.extend([0.7, 0.5, 0.9, 0.6, 0.8, 0.5, 0.55, 0.6, 0.5, 0.99]);
        assert!(!should_stop(&h[..11], 10));
        assert!(should_stop(&h, 10));
        assert!(!should_stop(&[1.0; 10], 10));
    }

    #[test]
    fn stop_tolerance() {
        let mut h = vec![1.0];
        h.extend([1.0 - 5e-7; 10]);
        assert!(should_stop(&h, 10));
        h.push(1.0 - 2e-6);
        assert!(!should_stop(&h, 10));
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_best(&[3.0]), Some(1));
        assert_eq!(select_best(&[2.0, 1.5, 1.7]), Some(2));
        assert_eq!(select_best(&[1.5, 1.5]), Some(1));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            batch: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let c = TrainConfig {
            layers: 2,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
