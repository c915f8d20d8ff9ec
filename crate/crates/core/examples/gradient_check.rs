//! Compare backpropagated gradients of a tiny translation model with
//! central finite differences.
//!
//! cargo run --example gradient_check

use hnmt::data::{BOS, EOS};
use hnmt::langtree::{preprocess, sample_tree};
use hnmt::model::{compile_route, ModelDims, ParameterStore, Scheme, Seq2Seq};
use hnmt::numerics::Tape;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = preprocess(&sample_tree(), 3)?;
    let route = compile_route(&tree, "es", "en", Scheme::Hnmt, 3)?;
    let mut store = ParameterStore::new(ModelDims::new(8, 6, 3), 1);
    store.ensure_route(&route, 12, 12);
    let xs = vec![vec![4, 5, 6], vec![7, 8]];
    let ys = vec![vec![BOS, 9, 10, EOS], vec![BOS, 11, EOS]];

    let loss_at = |store: &ParameterStore| -> f64 {
        let mut tape = Tape::new();
        let l = Seq2Seq::new(store, &route).unwrap().loss(&mut tape, &xs, &ys).unwrap();
        tape.scalar(l)
    };
    let mut tape = Tape::new();
    let l = Seq2Seq::new(&store, &route)?.loss(&mut tape, &xs, &ys)?;
    println!("loss {:.6}", tape.scalar(l));
    tape.backward(l, &mut store.params)?;

    let step = 1e-5;
    for id in store.route_params(&route) {
        let analytic = store.params.get(id).grad().map(<[f64]>::to_vec).unwrap_or_default();
        let mut probe = store.clone();
        let (mut num2, mut diff2, mut an2) = (0.0, 0.0, 0.0);
        for (i, a) in analytic.iter().enumerate() {
            let orig = probe.params.get(id).data()[i];
            probe.params.get_mut(id).data_mut()[i] = orig + step;
            let up = loss_at(&probe);
            probe.params.get_mut(id).data_mut()[i] = orig - step;
            let down = loss_at(&probe);
            probe.params.get_mut(id).data_mut()[i] = orig;
            let num = (up - down) / (2.0 * step);
            num2 += num * num;
            an2 += a * a;
            diff2 += (num - a) * (num - a);
        }
        let rel = diff2.sqrt() / f64::max(num2.sqrt(), an2.sqrt()).max(1e-300);
        println!("{:<45} relative error {rel:.2e}", store.params.name(id));
    }
    Ok(())
}
