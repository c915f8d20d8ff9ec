//! Generate synthetic parallel corpora whose surface overlap follows the
//! language tree, and write them in the `<task>.<lang>` file layout.
//!
//! cargo run --example synthetic_corpus -- [out_dir]

use hnmt::data::{generate_pairs, token_overlap, write_parallel, SynthSpec, SynthTask};
use hnmt::langtree::{sample_tree, similarity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = sample_tree();
    let task = |s: &str, t: &str| SynthTask {
        source: s.into(),
        target: t.into(),
        pairs: 300,
    };
    let spec = SynthSpec {
        seed: 3,
        base_vocab: 50,
        min_len: 3,
        max_len: 8,
        family_substitution: 0.5,
        suffix_fraction: 0.2,
        swap_fraction: 0.2,
        successors: 4,
        tasks: vec![task("en", "de"), task("es", "pt"), task("es", "en"), task("fi", "en")],
    };
    let out = std::env::args().nth(1);
    for (t, pairs) in generate_pairs(&tree, &spec)? {
        let sim = similarity(&tree, &t.source, &t.target)?;
        println!("{}-{}: similarity {sim}, token overlap {:.3}", t.source, t.target, token_overlap(&pairs));
        for p in pairs.iter().take(2) {
            println!("  {}  =>  {}", p.source.join(" "), p.target.join(" "));
        }
        if let Some(dir) = &out {
            let label = format!("{}-{}", t.source, t.target);
            write_parallel(std::path::Path::new(dir), &label, &t.source, &t.target, &pairs)?;
        }
    }
    Ok(())
}
