use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::route::{LayerKey, RoutePlan, Side};
use crate::numerics::{ParamId, ParamSet, Tensor};
use crate::seed;

/// How the sentence vector seeds the decoder stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderInit {
    /// `h` is the initial hidden state of the first decoder layer only.
    FirstLayer,
    /// `h` is the initial hidden state of every decoder layer.
    #[default]
    AllLayers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub hidden: usize,
    pub embed_dim: usize,
    pub layers: usize,
    #[serde(default)]
    pub decoder_init: DecoderInit,
    /// Half-width of the uniform initialization range. `None` uses
    /// `sqrt(3 / fan_in)`, which keeps activations at unit variance.
    #[serde(default)]
    pub init_scale: Option<f64>,
}

impl ModelDims {
    pub fn new(hidden: usize, embed_dim: usize, layers: usize) -> Self {
        ModelDims {
            hidden,
            embed_dim,
            layers,
            decoder_init: DecoderInit::AllLayers,
            init_scale: None,
        }
    }
}

/// Weights of one LSTM layer mapping `hidden → hidden`. Gate order in the
/// fused weight is input, forget, cell, output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub owner: LayerKey,
    /// `(2·hidden) × (4·hidden)`, rows for `[x, h_prev]`.
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Token embedding table plus the projection into the hidden size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingParams {
    pub table: ParamId,
    pub proj: ParamId,
    pub proj_bias: ParamId,
    pub vocab: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub vocab: usize,
}

/// Registry of every trainable tensor, keyed by layer and vocabulary owner.
/// Each tensor's initial value depends only on the root seed and its name.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    pub params: ParamSet,
    pub dims: ModelDims,
    seed: u64,
    layers: BTreeMap<LayerKey, LayerParams>,
    embeddings: BTreeMap<(Side, String), EmbeddingParams>,
    outputs: BTreeMap<String, OutputParams>,
}

impl ParameterStore {
    pub fn new(dims: ModelDims, seed: u64) -> Self {
        ParameterStore {
            params: ParamSet::new(),
            dims,
            seed,
            layers: BTreeMap::new(),
            embeddings: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform init; `fan_in` is the number of inputs summed per output.
    fn uniform(&self, name: &str, shape: Vec<usize>, fan_in: usize) -> Tensor {
        let mut rng = seed::rng(self.seed, &format!("init/{name}"));
        let n: usize = shape.iter().product();
        let s = self.dims.init_scale.unwrap_or_else(|| (3.0 / fan_in as f64).sqrt());
        let data = (0..n).map(|_| rng.random_range(-s..s)).collect();
        Tensor::new(shape, data).expect("shape matches")
    }

    pub fn layer(&self, key: &LayerKey) -> Option<&LayerParams> {
        self.layers.get(key)
    }

    pub fn layer_keys(&self) -> impl Iterator<Item = &LayerKey> {
        self.layers.keys()
    }

    pub fn ensure_layer(&mut self, key: &LayerKey) -> LayerParams {
        if let Some(l) = self.layers.get(key) {
            return l.clone();
        }
        let h = self.dims.hidden;
        let name = key.to_string();
        let w = self.uniform(&format!("{name}.w"), vec![2 * h, 4 * h], 2 * h);
        let mut b = vec![0.0; 4 * h];
        b[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
        let weight = self.params.insert(format!("{name}.w"), w);
        let bias = self.params.insert(format!("{name}.b"), Tensor::vector(b));
        let lp = LayerParams {
            owner: key.clone(),
            weight,
            bias,
        };
        self.layers.insert(key.clone(), lp.clone());
        lp
    }

    pub fn embedding(&self, side: Side, owner: &str) -> Option<&EmbeddingParams> {
        self.embeddings.get(&(side, owner.to_string()))
    }

    pub fn ensure_embedding(&mut self, side: Side, owner: &str, vocab: usize) -> EmbeddingParams {
        if let Some(e) = self.embeddings.get(&(side, owner.to_string())) {
            return e.clone();
        }
        let (d, h) = (self.dims.embed_dim, self.dims.hidden);
        let base = format!("emb:{}:{owner}", side_tag(side));
        let table = self.params.insert(format!("{base}.table"), self.uniform(&format!("{base}.table"), vec![vocab, d], 1));
        let proj = self.params.insert(format!("{base}.proj"), self.uniform(&format!("{base}.proj"), vec![d, h], d));
        let proj_bias = self.params.insert(format!("{base}.proj_b"), Tensor::zeros(vec![h]));
        let e = EmbeddingParams {
            table,
            proj,
            proj_bias,
            vocab,
        };
        self.embeddings.insert((side, owner.to_string()), e.clone());
        e
    }

    pub fn output(&self, owner: &str) -> Option<&OutputParams> {
        self.outputs.get(owner)
    }

    pub fn ensure_output(&mut self, owner: &str, vocab: usize) -> OutputParams {
        if let Some(o) = self.outputs.get(owner) {
            return o.clone();
        }
        let h = self.dims.hidden;
        let base = format!("out:{owner}");
        let weight = self.params.insert(format!("{base}.w"), self.uniform(&format!("{base}.w"), vec![h, vocab], h));
        let bias = self.params.insert(format!("{base}.b"), Tensor::zeros(vec![vocab]));
        let o = OutputParams { weight, bias, vocab };
        self.outputs.insert(owner.to_string(), o.clone());
        o
    }

    /// Creates every tensor `route` touches that does not exist yet.
    pub fn ensure_route(&mut self, route: &RoutePlan, src_vocab: usize, tgt_vocab: usize) {
        for k in route.layers() {
            self.ensure_layer(k);
        }
        self.ensure_embedding(Side::Encoder, &route.source_owner, src_vocab);
        self.ensure_embedding(Side::Decoder, &route.target_owner, tgt_vocab);
        self.ensure_output(&route.target_owner, tgt_vocab);
    }

    /// Ids of every tensor on `route`, in a fixed order. Panics if the route
    /// was never registered with [`ParameterStore::ensure_route`].
    pub fn route_params(&self, route: &RoutePlan) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for k in route.layers() {
            let l = &self.layers[k];
            ids.extend([l.weight, l.bias]);
        }
        let e = &self.embeddings[&(Side::Encoder, route.source_owner.clone())];
        ids.extend([e.table, e.proj, e.proj_bias]);
        let e = &self.embeddings[&(Side::Decoder, route.target_owner.clone())];
        ids.extend([e.table, e.proj, e.proj_bias]);
        let o = &self.outputs[&route.target_owner];
        ids.extend([o.weight, o.bias]);
        ids.sort();
        ids.dedup();
        ids
    }

    /// Overwrites rows of an embedding table, e.g. with pretrained vectors.
    pub fn set_embedding_rows(&mut self, side: Side, owner: &str, rows: &[(usize, Vec<f64>)]) {
        let Some(e) = self.embedding(side, owner).cloned() else { return };
        let d = self.dims.embed_dim;
        let t = self.params.get_mut(e.table);
        for (i, v) in rows {
            if *i < e.vocab && v.len() == d {
                t.data_mut()[i * d..(i + 1) * d].copy_from_slice(v);
            }
        }
    }
}

fn side_tag(side: Side) -> &'static str {
    match side {
        Side::Encoder => "src",
        Side::Decoder => "tgt",
    }
}
