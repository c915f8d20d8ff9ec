//! Corpus BLEU of a hypothesis file against a reference file, one
//! whitespace-tokenized sentence per line.
//!
//! cargo run --example bleu_scoring -- hyp.txt ref.txt

use hnmt::data::tokenize;
use hnmt::evaluation::{bleu, Smoothing};

fn read(path: &str) -> std::io::Result<Vec<Vec<String>>> {
    Ok(std::fs::read_to_string(path)?.lines().map(tokenize).collect())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (hyp, refs) = match args.as_slice() {
        [h, r] => (read(h)?, read(r)?),
        _ => {
            let h = ["the cat sat on the mat", "a quick brown dog"];
            let r = ["the cat sat on a mat", "the quick brown dog"];
            (h.iter().map(|s| tokenize(s)).collect(), r.iter().map(|s| tokenize(s)).collect())
        }
    };
    for s in [Smoothing::AddOne, Smoothing::Strict] {
        let r = bleu(&hyp, &refs, s)?;
        println!(
            "{s:?}: BLEU {:.2}  p = {:.3}/{:.3}/{:.3}/{:.3}  BP {:.3}  (hyp {} ref {} tokens)",
            r.bleu, r.precisions[0], r.precisions[1], r.precisions[2], r.precisions[3], r.brevity_penalty, r.candidate_len, r.reference_len
        );
    }
    Ok(())
}
