//! Train one HNMT model on three synthetic tasks and report test BLEU.
//!
//! cargo run --example train_toy -- [rounds]

use hnmt::data::{generate_synthetic, SynthSpec, SynthTask};
use hnmt::evaluation::Smoothing;
use hnmt::experiment::{prepare, score_tasks};
use hnmt::langtree::sample_tree;
use hnmt::model::Scheme;
use hnmt::training::{train_with, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rounds: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let tree = sample_tree();
    let task = |s: &str, t: &str| SynthTask {
        source: s.into(),
        target: t.into(),
        pairs: 600,
    };
    let spec = SynthSpec {
        seed: 1,
        base_vocab: 30,
        min_len: 3,
        max_len: 6,
        family_substitution: 0.5,
        suffix_fraction: 0.2,
        swap_fraction: 0.2,
        successors: 3,
        tasks: vec![task("es", "en"), task("pt", "en"), task("fi", "de")],
    };
    let data = generate_synthetic(&tree, &spec)?;
    let config = TrainConfig {
        batch: 32,
        layers: 4,
        hidden: 48,
        embed_dim: 24,
        max_rounds: rounds,
        scheme: Scheme::Hnmt,
        ..TrainConfig::default()
    };
    let mut p = prepare(&tree, &data, &config, 1)?;
    println!("{} parameters", p.store.params.scalar_count());
    let out = train_with(&p.tasks, &config, &mut p.store, |s| {
        let per_task: Vec<String> = s.task_losses.iter().map(|(k, v)| format!("{k} {v:.3}")).collect();
        println!("round {}: {} | val {:.3}", s.round, per_task.join(", "), s.val_history.last().unwrap());
    })?;
    println!("best round {}", out.state.best.as_ref().map_or(0, |b| b.round));
    for (s, r) in score_tasks(&p, config.scheme, config.seed, 64, Smoothing::AddOne)? {
        println!("{}-{}: BLEU {:.2} (BP {:.3})", s.source, s.target, s.bleu, r.brevity_penalty);
    }
    Ok(())
}
