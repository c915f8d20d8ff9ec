//! Initialize source embeddings from a word2vec-style text file and report
//! vocabulary coverage. Uncovered rows keep their random initialization.
//!
//! cargo run --example pretrained_embeddings

use hnmt::data::{build_vocab, parse_embeddings, tokenize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sentences: Vec<Vec<String>> = ["el gato come", "el perro duerme", "la casa"].iter().map(|s| tokenize(s)).collect();
    let vocab = build_vocab(sentences.iter().map(Vec::as_slice), "es", 1, &[]);
    let file = "3 4\nel 0.1 0.2 0.3 0.4\ngato -0.5 0.1 0.0 0.2\ncasa 0.3 0.3 -0.1 0.0\n";
    let table = parse_embeddings(file, &vocab, 4, 7)?;
    println!("coverage {:.1}% of {} tokens", 100.0 * table.coverage(&vocab), vocab.regular_tokens().len());
    for (id, row) in table.covered_rows() {
        println!("  {:<7} {row:?}", vocab.token(id).unwrap_or("?"));
    }
    Ok(())
}
