use super::{bleu, BleuReport, EvalError, Smoothing};
use crate::data::Vocabulary;
use crate::model::{default_max_len, ModelError, ParameterStore, RoutePlan, Seq2Seq};
use crate::numerics::Tape;

/// Greedy translations of `sources`, decoded in chunks of `batch`.
pub fn translate(store: &ParameterStore, route: &RoutePlan, sources: &[Vec<usize>], batch: usize) -> Result<Vec<Vec<usize>>, ModelError> {
    let model = Seq2Seq::new(store, route)?;
    let mut out = Vec::with_capacity(sources.len());
    for chunk in sources.chunks(batch.max(1)) {
        let mut tape = Tape::new();
        let h = model.encode(&mut tape, chunk)?;
        let lens: Vec<usize> = chunk.iter().map(|s| default_max_len(s.len())).collect();
        out.extend(model.decode_greedy(&mut tape, h, &lens)?);
    }
    Ok(out)
}

/// Corpus BLEU of the greedy translations of `sources` against the raw
/// reference tokens.
pub fn score_task(
    store: &ParameterStore,
    route: &RoutePlan,
    sources: &[Vec<usize>],
    references: &[Vec<String>],
    target_vocab: &Vocabulary,
    batch: usize,
    smoothing: Smoothing,
) -> Result<BleuReport, EvalError> {
    let hyps = translate(store, route, sources, batch)?;
    let cands: Vec<Vec<String>> = hyps.iter().map(|h| target_vocab.decode(h)).collect();
    bleu(&cands, references, smoothing)
}
