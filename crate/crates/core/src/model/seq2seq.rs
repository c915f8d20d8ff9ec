//! Batched LSTM encoder-decoder over a [`RoutePlan`].
//!
//! Every layer is `hidden → hidden`; token embeddings are projected to the
//! hidden size before the first layer. The encoder consumes right-padded
//! batches, freezing each row's state once its sequence has ended, and the
//! sentence vector is the last valid hidden state of the top encoder layer.

use super::route::{LayerKey, RoutePlan, Side};
use super::store::{DecoderInit, ParameterStore};
use super::ModelError;
use crate::data::vocab::{BOS, EOS, PAD};
use crate::numerics::{Tape, Var};

struct LayerVars {
    weight: Var,
    bias: Var,
}

struct EmbedVars {
    table: Var,
    proj: Var,
    proj_bias: Var,
    vocab: usize,
}

/// Read-only view of a store for running one route.
pub struct Seq2Seq<'a> {
    store: &'a ParameterStore,
    route: &'a RoutePlan,
}

impl<'a> Seq2Seq<'a> {
    /// Fails if any tensor of `route` is missing from `store`.
    pub fn new(store: &'a ParameterStore, route: &'a RoutePlan) -> Result<Self, ModelError> {
        for k in route.layers() {
            if store.layer(k).is_none() {
                return Err(ModelError::MissingLayer(k.to_string()));
            }
        }
        if store.embedding(Side::Encoder, &route.source_owner).is_none()
            || store.embedding(Side::Decoder, &route.target_owner).is_none()
            || store.output(&route.target_owner).is_none()
        {
            return Err(ModelError::MissingLayer(format!("vocabulary tensors of {}", route.task_label())));
        }
        Ok(Seq2Seq { store, route })
    }

    fn hidden(&self) -> usize {
        self.store.dims.hidden
    }

    fn layer(&self, tape: &mut Tape, key: &LayerKey) -> LayerVars {
        let l = self.store.layer(key).expect("checked in new");
        LayerVars {
            weight: tape.param(&self.store.params, l.weight),
            bias: tape.param(&self.store.params, l.bias),
        }
    }

    fn embed_vars(&self, tape: &mut Tape, side: Side) -> EmbedVars {
        let owner = match side {
            Side::Encoder => &self.route.source_owner,
            Side::Decoder => &self.route.target_owner,
        };
        let e = self.store.embedding(side, owner).expect("checked in new");
        EmbedVars {
            table: tape.param(&self.store.params, e.table),
            proj: tape.param(&self.store.params, e.proj),
            proj_bias: tape.param(&self.store.params, e.proj_bias),
            vocab: e.vocab,
        }
    }

    fn embed(&self, tape: &mut Tape, e: &EmbedVars, ids: &[usize]) -> Result<Var, ModelError> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= e.vocab) {
            return Err(ModelError::OutOfVocabulary { id: bad, vocab: e.vocab });
        }
        let x = tape.embedding(e.table, ids)?;
        let x = tape.matmul(x, e.proj)?;
        Ok(tape.add_bias(x, e.proj_bias)?)
    }

    fn zeros(&self, tape: &mut Tape, rows: usize) -> Var {
        tape.input(&crate::numerics::Tensor::zeros(vec![rows, self.hidden()]))
    }

    fn step(&self, tape: &mut Tape, l: &LayerVars, x: Var, h: Var, c: Var) -> Result<(Var, Var), ModelError> {
        let hd = self.hidden();
        let xh = tape.concat(&[x, h])?;
        let gates = tape.matmul(xh, l.weight)?;
        let gates = tape.add_bias(gates, l.bias)?;
        let i = tape.slice_cols(gates, 0, hd)?;
        let f = tape.slice_cols(gates, hd, hd)?;
        let g = tape.slice_cols(gates, 2 * hd, hd)?;
        let o = tape.slice_cols(gates, 3 * hd, hd)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_new = tape.add(fc, ig)?;
        let tc = tape.tanh(c_new);
        let h_new = tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    /// Encodes a batch of token sequences into a `batch × hidden` matrix.
    /// Sequences must be non-empty and already carry the target-language
    /// token when the route needs one.
    pub fn encode(&self, tape: &mut Tape, xs: &[Vec<usize>]) -> Result<Var, ModelError> {
        if xs.is_empty() || xs.iter().any(Vec::is_empty) {
            return Err(ModelError::EmptySequence);
        }
        let b = xs.len();
        let t_max = xs.iter().map(Vec::len).max().unwrap_or(0);
        let e = self.embed_vars(tape, Side::Encoder);
        // Inputs per time step: rows beyond a sequence's end read PAD and are
        // masked out of the state update.
        let mut seq = Vec::with_capacity(t_max);
        let mut masks = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let ids: Vec<usize> = xs.iter().map(|x| x.get(t).copied().unwrap_or(PAD)).collect();
            seq.push(self.embed(tape, &e, &ids)?);
            let m: Vec<f64> = xs.iter().map(|x| if t < x.len() { 1.0 } else { 0.0 }).collect();
            masks.push(if m.iter().all(|v| *v == 1.0) { None } else { Some(m) });
        }
        let mut top = None;
        for key in &self.route.encoder_layers {
            let l = self.layer(tape, key);
            let mut h = self.zeros(tape, b);
            let mut c = h;
            let mut outputs = Vec::with_capacity(t_max);
            for (x, mask) in seq.iter().zip(&masks) {
                let (hn, cn) = self.step(tape, &l, *x, h, c)?;
                (h, c) = match mask {
                    None => (hn, cn),
                    Some(m) => (tape.blend(hn, h, m)?, tape.blend(cn, c, m)?),
                };
                outputs.push(h);
            }
            top = Some(h);
            seq = outputs;
        }
        Ok(top.expect("at least one encoder layer"))
    }

    fn initial_states(&self, tape: &mut Tape, h: Var, rows: usize) -> Vec<(Var, Var)> {
        (0..self.route.decoder_layers.len())
            .map(|i| {
                let z = self.zeros(tape, rows);
                let seeded = i == 0 || self.store.dims.decoder_init == DecoderInit::AllLayers;
                (if seeded { h } else { z }, z)
            })
            .collect()
    }

    /// Teacher-forced decoding. Each `ys[r]` starts with BOS and ends with
    /// EOS; returns `(logits, targets)` with one row per (step, batch row),
    /// targets padded with PAD.
    pub fn decode_teacher_forced(&self, tape: &mut Tape, h: Var, ys: &[Vec<usize>]) -> Result<(Var, Vec<usize>), ModelError> {
        let b = ys.len();
        if b == 0 || ys.iter().any(|y| y.len() < 2) {
            return Err(ModelError::EmptySequence);
        }
        if tape.shape(h) != [b, self.hidden()] {
            return Err(ModelError::BatchMismatch {
                expected: b,
                got: tape.shape(h).to_vec(),
            });
        }
        let steps = ys.iter().map(|y| y.len() - 1).max().unwrap_or(0);
        let e = self.embed_vars(tape, Side::Decoder);
        let out = self.store.output(&self.route.target_owner).expect("checked in new");
        let w_out = tape.param(&self.store.params, out.weight);
        let b_out = tape.param(&self.store.params, out.bias);
        let layers: Vec<LayerVars> = self.route.decoder_layers.iter().map(|k| self.layer(tape, k)).collect();
        let mut states = self.initial_states(tape, h, b);
        let mut tops = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(steps * b);
        for t in 0..steps {
            let ids: Vec<usize> = ys.iter().map(|y| if t + 1 < y.len() { y[t] } else { PAD }).collect();
            targets.extend(ys.iter().map(|y| y.get(t + 1).copied().unwrap_or(PAD)));
            let mut x = self.embed(tape, &e, &ids)?;
            for (l, st) in layers.iter().zip(states.iter_mut()) {
                let (hn, cn) = self.step(tape, l, x, st.0, st.1)?;
                *st = (hn, cn);
                x = hn;
            }
            tops.push(x);
        }
        if let Some(&bad) = targets.iter().find(|&&id| id >= out.vocab) {
            return Err(ModelError::OutOfVocabulary { id: bad, vocab: out.vocab });
        }
        let stacked = tape.concat_rows(&tops)?;
        let logits = tape.matmul(stacked, w_out)?;
        let logits = tape.add_bias(logits, b_out)?;
        Ok((logits, targets))
    }

    /// Mean token cross-entropy of a batch of `(source, target)` id pairs.
    pub fn loss(&self, tape: &mut Tape, xs: &[Vec<usize>], ys: &[Vec<usize>]) -> Result<Var, ModelError> {
        let h = self.encode(tape, xs)?;
        let (logits, targets) = self.decode_teacher_forced(tape, h, ys)?;
        Ok(tape.cross_entropy(logits, &targets, PAD)?)
    }

    /// Greedy decoding from BOS, one output per row, EOS excluded. Row `r`
    /// stops at EOS or after `max_lens[r]` tokens; ties go to the lowest id.
    pub fn decode_greedy(&self, tape: &mut Tape, h: Var, max_lens: &[usize]) -> Result<Vec<Vec<usize>>, ModelError> {
        let b = max_lens.len();
        if tape.shape(h) != [b, self.hidden()] {
            return Err(ModelError::BatchMismatch {
                expected: b,
                got: tape.shape(h).to_vec(),
            });
        }
        let e = self.embed_vars(tape, Side::Decoder);
        let out = self.store.output(&self.route.target_owner).expect("checked in new");
        let w_out = tape.param(&self.store.params, out.weight);
        let b_out = tape.param(&self.store.params, out.bias);
        let layers: Vec<LayerVars> = self.route.decoder_layers.iter().map(|k| self.layer(tape, k)).collect();
        let mut states = self.initial_states(tape, h, b);
        let mut current = vec![BOS; b];
        let mut done: Vec<bool> = max_lens.iter().map(|m| *m == 0).collect();
        let mut result = vec![Vec::new(); b];
        let steps = max_lens.iter().copied().max().unwrap_or(0);
        for _ in 0..steps {
            if done.iter().all(|d| *d) {
                break;
            }
            let mut x = self.embed(tape, &e, &current)?;
            for (l, st) in layers.iter().zip(states.iter_mut()) {
                let (hn, cn) = self.step(tape, l, x, st.0, st.1)?;
                *st = (hn, cn);
                x = hn;
            }
            let logits = tape.matmul(x, w_out)?;
            let logits = tape.add_bias(logits, b_out)?;
            let v = out.vocab;
            let values = tape.value(logits);
            for r in 0..b {
                if done[r] {
                    current[r] = PAD;
                    continue;
                }
                let row = &values[r * v..(r + 1) * v];
                let best = argmax(row);
                if best == EOS {
                    done[r] = true;
                } else {
                    result[r].push(best);
                    if result[r].len() >= max_lens[r] {
                        done[r] = true;
                    }
                }
                current[r] = best;
            }
        }
        Ok(result)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Default decoding budget for a source of `len` tokens.
pub fn default_max_len(len: usize) -> usize {
    2 * len + 5
}
