//! Small models and datasets built directly on the library types.

use hnmt::data::{IdPair, TaskDataset, BOS, EOS};
use hnmt::langtree::{preprocess, sample_tree};
use hnmt::model::{compile_route, ModelDims, ParameterStore, RoutePlan, Scheme, Seq2Seq};
use hnmt::numerics::{ParamSet, Tape, Var};
use hnmt::training::TrainTask;
use rand::Rng;

use super::rng;

pub const FIRST_ID: usize = 4;

/// Source rows and BOS/EOS-wrapped target rows.
pub type Batch = (Vec<Vec<usize>>, Vec<Vec<usize>>);

/// Random (source, target) id batches with targets wrapped in BOS/EOS.
pub fn random_batch(seed: u64, rows: usize, vocab: usize, max_len: usize) -> Batch {
    let mut r = rng(seed);
    let seq = |r: &mut rand_chacha::ChaCha8Rng| {
        let n = r.random_range(1..=max_len);
        (0..n).map(|_| r.random_range(FIRST_ID..vocab)).collect::<Vec<usize>>()
    };
    let xs = (0..rows).map(|_| seq(&mut r)).collect();
    let ys = (0..rows)
        .map(|_| {
            let mut y = vec![BOS];
            y.extend(seq(&mut r));
            y.push(EOS);
            y
        })
        .collect();
    (xs, ys)
}

/// Routes of `tasks` on the sample tree, registered in a fresh store.
pub fn sample_model(scheme: Scheme, layers: usize, dims: ModelDims, vocab: usize, seed: u64, tasks: &[(&str, &str)]) -> (ParameterStore, Vec<RoutePlan>) {
    let tree = if scheme == Scheme::Hnmt { preprocess(&sample_tree(), layers).unwrap() } else { sample_tree() };
    let mut store = ParameterStore::new(dims, seed);
    let routes: Vec<RoutePlan> = tasks
        .iter()
        .map(|(s, t)| {
            let r = compile_route(&tree, s, t, scheme, layers).unwrap();
            store.ensure_route(&r, vocab, vocab);
            r
        })
        .collect();
    (store, routes)
}

/// Sum of per-task teacher-forced losses over one batch each.
pub fn joint_loss(params: &ParamSet, store: &ParameterStore, routes: &[RoutePlan], batches: &[Batch], tape: &mut Tape) -> Var {
    let mut view = store.clone();
    view.params = params.clone();
    let mut total: Option<Var> = None;
    for (r, (xs, ys)) in routes.iter().zip(batches) {
        let l = Seq2Seq::new(&view, r).unwrap().loss(tape, xs, ys).unwrap();
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l).unwrap(),
        });
    }
    total.unwrap()
}

/// Id-level task whose target is the source itself.
pub fn copy_task(route: RoutePlan, seed: u64, pairs: usize, vocab: usize, max_len: usize) -> TrainTask {
    let mut r = rng(seed);
    let mut make = |n: usize| -> Vec<IdPair> {
        (0..n)
            .map(|_| {
                let len = r.random_range(1..=max_len);
                let s: Vec<usize> = (0..len).map(|_| r.random_range(FIRST_ID..vocab)).collect();
                let mut t = vec![BOS];
                t.extend(&s);
                t.push(EOS);
                IdPair { source: s, target: t }
            })
            .collect()
    };
    let train = make(pairs);
    let validation = make((pairs / 7).max(1));
    let test = make((pairs / 7).max(1));
    TrainTask {
        data: TaskDataset {
            source_lang: route.source.clone(),
            target_lang: route.target.clone(),
            train,
            validation,
            test,
        },
        route,
    }
}

/// Per-tensor relative error of the full model gradient against central
/// differences: HNMT, N = 3, hidden 8, vocabulary 20, two tasks sharing
/// the target side.
pub fn model_gradient_errors(init: hnmt::model::DecoderInit) -> Vec<(String, f64)> {
    let dims = ModelDims {
        decoder_init: init,
        ..ModelDims::new(8, 6, 3)
    };
    let tasks = [("es", "en"), ("pt", "en")];
    let (mut store, routes) = sample_model(Scheme::Hnmt, 3, dims, 20, 11, &tasks);
    let batches: Vec<_> = (0..tasks.len()).map(|i| random_batch(100 + i as u64, 3, 20, 4)).collect();
    let ids: Vec<_> = store.params.ids().collect();
    let frozen = store.clone();
    super::check_params(&mut store.params, &ids, |p, tape| joint_loss(p, &frozen, &routes, &batches, tape))
}

pub fn toy_config(scheme: Scheme) -> hnmt::training::TrainConfig {
    hnmt::training::TrainConfig {
        batch: 16,
        lr: 0.01,
        layers: 3,
        hidden: 16,
        embed_dim: 8,
        scheme,
        seed: 3,
        patience: 10,
        max_rounds: 20,
        ..Default::default()
    }
}

/// Copy tasks over the sample tree with a store holding all their routes.
pub fn copy_setup(config: &hnmt::training::TrainConfig, tasks: &[(&str, &str)], pairs: usize, vocab: usize) -> (ParameterStore, Vec<TrainTask>) {
    let (store, routes) = sample_model(config.scheme, config.layers, config.dims(), vocab, config.seed, tasks);
    let tasks = routes
        .into_iter()
        .enumerate()
        .map(|(i, r)| copy_task(r, 40 + i as u64, pairs, vocab, 5))
        .collect();
    (store, tasks)
}
