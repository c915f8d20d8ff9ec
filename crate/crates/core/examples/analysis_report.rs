//! Build the per-language, per-size and per-similarity tables and a
//! paired t-test from per-task scores.
//!
//! cargo run --example analysis_report

use hnmt::evaluation::{group_by_similarity, group_by_size, language_summary, paired_t_test, TaskScore, DEFAULT_SIZE_EDGES};
use hnmt::langtree::sample_tree;
use hnmt::model::Scheme;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = [
        ("es", "pt", 8_000, 14.2, 16.0),
        ("es", "en", 3_000, 6.1, 6.9),
        ("en", "de", 60_000, 11.5, 11.9),
        ("fi", "hu", 900, 2.3, 3.8),
        ("fi", "en", 20_000, 4.0, 3.7),
        ("de", "es", 120_000, 9.4, 9.8),
    ];
    let mut scores = Vec::new();
    for (s, t, n, base, hnmt) in rows {
        for (scheme, bleu) in [(Scheme::ManyToMany, base), (Scheme::Hnmt, hnmt)] {
            scores.push(TaskScore {
                source: s.into(),
                target: t.into(),
                scheme,
                seed: 1,
                bleu,
                train_pairs: n,
            });
        }
    }
    println!("{}", language_summary(&scores).to_pretty());
    println!("{}", group_by_size(&scores, &DEFAULT_SIZE_EDGES).to_pretty());
    println!("{}", group_by_similarity(&scores, &sample_tree())?.to_pretty());
    println!("{}", paired_t_test(&scores, Scheme::ManyToMany, Scheme::Hnmt)?.summary());
    print!("{}", language_summary(&scores).to_csv());
    Ok(())
}
