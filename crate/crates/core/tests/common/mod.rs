//! Shared oracles for the integration tests and the acceptance suite.
#![allow(dead_code)]

use hnmt::langtree::{FamilyNode, LanguageTree};
use hnmt::numerics::{ParamId, ParamSet, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// ‖a − b‖ / max(‖a‖, ‖b‖), or 0 when both are (numerically) zero.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of a scalar function of flat inputs.
pub fn numeric_grad(mut f: impl FnMut(&[Tensor]) -> f64, inputs: &[Tensor], which: usize) -> Vec<f64> {
    let mut x: Vec<Tensor> = inputs.to_vec();
    (0..inputs[which].len())
        .map(|i| {
            let orig = x[which].data()[i];
            x[which].data_mut()[i] = orig + FD_STEP;
            let up = f(&x);
            x[which].data_mut()[i] = orig - FD_STEP;
            let down = f(&x);
            x[which].data_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Worst relative error over all inputs between tape gradients and
/// central differences of `build`, which maps input vars to a scalar.
pub fn check_inputs(build: impl Fn(&mut Tape, &[Var]) -> Var, inputs: &[Tensor]) -> f64 {
    let eval = |xs: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.input(t)).collect();
        let out = build(&mut tape, &vars);
        tape.scalar(out)
    };
    let mut tape = Tape::new();
    let tracked: Vec<Tensor> = inputs.iter().map(|t| t.clone().with_grad()).collect();
    let vars: Vec<Var> = tracked.iter().map(|t| tape.input(t)).collect();
    let out = build(&mut tape, &vars);
    let analytic = tape.backward_inputs(out, &vars).unwrap();
    (0..inputs.len())
        .map(|i| rel_err(&analytic[i], &numeric_grad(eval, inputs, i)))
        .fold(0.0, f64::max)
}

/// Per-parameter relative error between backward and central differences
/// of `loss`, which evaluates the model on `params`.
pub fn check_params(params: &mut ParamSet, ids: &[ParamId], loss: impl Fn(&ParamSet, &mut Tape) -> Var) -> Vec<(String, f64)> {
    params.zero_grads();
    let mut tape = Tape::new();
    let l = loss(params, &mut tape);
    tape.backward(l, params).unwrap();
    let mut out = Vec::new();
    for &id in ids {
        let analytic = params.get(id).grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; params.get(id).len()]);
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..analytic.len() {
            let orig = params.get(id).data()[i];
            let at = |v: f64, p: &mut ParamSet| {
                p.get_mut(id).data_mut()[i] = v;
                let mut t = Tape::new();
                let l = loss(p, &mut t);
                t.scalar(l)
            };
            let up = at(orig + FD_STEP, params);
            let down = at(orig - FD_STEP, params);
            params.get_mut(id).data_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
        out.push((params.name(id).to_string(), rel_err(&analytic, &numeric)));
    }
    params.zero_grads();
    out
}

pub fn uniform_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random family tree with languages `l0, l1, …`. Families may have a
/// single child, and languages may sit at any depth, including directly
/// under the root.
pub fn random_tree(seed: u64, max_depth: usize, max_children: usize) -> LanguageTree {
    let mut r = rng(seed);
    let mut next = 0usize;
    let mut fam = 0usize;
    fn build(r: &mut ChaCha8Rng, depth: usize, max_depth: usize, max_children: usize, next: &mut usize, fam: &mut usize) -> Vec<FamilyNode> {
        let n = r.random_range(1..=max_children);
        (0..n)
            .map(|_| {
                if depth >= max_depth || r.random_bool(0.35) {
                    *next += 1;
                    FamilyNode::language(format!("l{}", *next - 1))
                } else {
                    *fam += 1;
                    let name = format!("F{}", *fam);
                    FamilyNode::family(name, build(r, depth + 1, max_depth, max_children, next, fam))
                }
            })
            .collect()
    }
    let mut children = build(&mut r, 1, max_depth, max_children, &mut next, &mut fam);
    if next == 0 {
        children.push(FamilyNode::language("l0"));
    }
    LanguageTree::from_root(FamilyNode::family("world", children)).expect("generated trees are valid")
}

pub mod props;
pub mod fixtures;
pub mod oracles;
