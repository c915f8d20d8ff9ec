//! Independent reference computations for BLEU and the analysis tables.

use hnmt::evaluation::Smoothing;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn occurrences(seq: &[String], gram: &[String]) -> usize {
    if gram.len() > seq.len() {
        return 0;
    }
    (0..=seq.len() - gram.len()).filter(|&i| &seq[i..i + gram.len()] == gram).count()
}

/// Corpus BLEU-4 by scanning every window; no hashing.
pub fn brute_bleu(cands: &[Vec<String>], refs: &[Vec<String>], smoothing: Smoothing) -> f64 {
    let mut logsum = 0.0;
    for n in 1..=4 {
        let (mut m, mut total) = (0usize, 0usize);
        for (c, r) in cands.iter().zip(refs) {
            if c.len() < n {
                continue;
            }
            total += c.len() - n + 1;
            for i in 0..=c.len() - n {
                let g = &c[i..i + n];
                let first = (0..i).all(|j| &c[j..j + n] != g);
                if first {
                    m += occurrences(c, g).min(occurrences(r, g));
                }
            }
        }
        let p = if m > 0 {
            m as f64 / total as f64
        } else if n > 1 && smoothing == Smoothing::AddOne {
            1.0 / (total as f64 + 1.0)
        } else {
            return 0.0;
        };
        logsum += p.ln();
    }
    let c: usize = cands.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    if c == 0 {
        return 0.0;
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * (logsum / 4.0).exp()
}

/// A small random corpus over a tiny alphabet, so n-grams repeat and match.
pub fn random_corpus(rng: &mut ChaCha8Rng, sentences: usize, alphabet: usize) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let sent = |r: &mut ChaCha8Rng| -> Vec<String> {
        let n = r.random_range(0..9);
        (0..n).map(|_| format!("w{}", r.random_range(0..alphabet))).collect()
    };
    let refs: Vec<Vec<String>> = (0..sentences).map(|_| sent(rng)).collect();
    let cands = refs
        .iter()
        .map(|r| {
            // Mostly copy the reference with edits so high-order matches occur.
            let mut c: Vec<String> = r.iter().filter(|_| rng.random_bool(0.85)).cloned().collect();
            if rng.random_bool(0.5) {
                c.push(format!("w{}", rng.random_range(0..alphabet)));
            }
            if rng.random_bool(0.2) {
                c = sent(rng);
            }
            c
        })
        .collect();
    (cands, refs)
}
