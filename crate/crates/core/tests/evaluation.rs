mod common;

use common::oracles::{brute_bleu, random_corpus};
use common::rng;
use hnmt::evaluation::{
    bleu, group_by_similarity, group_by_size, histogram, language_summary, paired_t_test, Smoothing, TaskScore,
    DEFAULT_SIZE_EDGES, OVERALL_ROW,
};
use hnmt::langtree::sample_tree;
use hnmt::model::Scheme;
use proptest::prelude::*;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn matches_brute_force_on_random_corpora() {
    let mut r = rng(17);
    for i in 0..200 {
        let (c, refs) = random_corpus(&mut r, 1 + i % 6, 2 + i % 5);
        for s in [Smoothing::AddOne, Smoothing::Strict] {
            let got = bleu(&c, &refs, s).unwrap().bleu;
            let want = brute_bleu(&c, &refs, s);
            assert!((got - want).abs() <= 1e-9, "corpus {i} {s:?}: {got} vs {want}");
        }
    }
}

#[test]
fn clipped_unigram_example() {
    let r = bleu(&[words("the the the")], &[words("the cat")], Smoothing::AddOne).unwrap();
    assert!((r.precisions[0] - 1.0 / 3.0).abs() < 1e-15);
    let want = brute_bleu(&[words("the the the")], &[words("the cat")], Smoothing::AddOne);
    assert!((r.bleu - want).abs() < 1e-12);
}

#[test]
fn brevity_penalty_applies_to_short_output() {
    let r = bleu(&[words("a b c d")], &[words("a b c d e f g h")], Smoothing::Strict).unwrap();
    assert!((r.brevity_penalty - (1.0f64 - 2.0).exp()).abs() < 1e-15);
    assert!((r.bleu - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
}

fn corpus() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<Vec<String>>)> {
    any::<u64>().prop_map(|s| random_corpus(&mut rng(s), 4, 4))
}

proptest! {
    #[test]
    fn bleu_in_range((c, refs) in corpus()) {
        let b = bleu(&c, &refs, Smoothing::AddOne).unwrap().bleu;
        prop_assert!((0.0..=100.0).contains(&b));
        prop_assume!(c.iter().any(|x| !x.is_empty()));
        prop_assert_eq!(b == 100.0, c == refs);
    }

    #[test]
    fn identical_corpora_score_100(seed in any::<u64>()) {
        let (_, refs) = random_corpus(&mut rng(seed), 5, 3);
        prop_assume!(refs.iter().any(|r| !r.is_empty()));
        prop_assert_eq!(bleu(&refs, &refs, Smoothing::AddOne).unwrap().bleu, 100.0);
        if refs.iter().any(|r| r.len() >= 4) {
            prop_assert_eq!(bleu(&refs, &refs, Smoothing::Strict).unwrap().bleu, 100.0);
        }
    }

    #[test]
    fn relabeling_tokens_leaves_bleu_unchanged((c, refs) in corpus(), shift in 1usize..50) {
        let relabel = |xs: &[Vec<String>]| -> Vec<Vec<String>> {
            xs.iter().map(|s| s.iter().map(|w| format!("t{}", w[1..].parse::<usize>().unwrap() + shift)).collect()).collect()
        };
        let a = bleu(&c, &refs, Smoothing::AddOne).unwrap().bleu;
        let b = bleu(&relabel(&c), &relabel(&refs), Smoothing::AddOne).unwrap().bleu;
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

fn score(src: &str, tgt: &str, scheme: Scheme, seed: u64, bleu: f64, train_pairs: usize) -> TaskScore {
    TaskScore {
        source: src.into(),
        target: tgt.into(),
        scheme,
        seed,
        bleu,
        train_pairs,
    }
}

fn random_scores(seed: u64) -> Vec<TaskScore> {
    use rand::Rng;
    let mut r = rng(seed);
    let langs = ["en", "de", "es", "pt", "fi", "hu"];
    let mut out = Vec::new();
    for s in langs {
        for t in langs {
            if s == t || !r.random_bool(0.5) {
                continue;
            }
            let n = r.random_range(0..300_000);
            for scheme in [Scheme::ManyToMany, Scheme::Hnmt] {
                out.push(score(s, t, scheme, 1, r.random_range(0.0..40.0), n));
            }
        }
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

proptest! {
    #[test]
    fn size_table_matches_hand_grouping(seed in any::<u64>()) {
        let scores = random_scores(seed);
        prop_assume!(!scores.is_empty());
        let t = group_by_size(&scores, &DEFAULT_SIZE_EDGES);
        for row in &t.rows {
    for &scheme in &t.schemes {
                let xs: Vec<f64> = scores
                    .iter()
                    .filter(|s| s.scheme == scheme && hnmt::evaluation::size_bucket(s.train_pairs, &DEFAULT_SIZE_EDGES).1 == row.key)
                    .map(|s| s.bleu)
                    .collect();
                prop_assert!((t.mean(&row.key, scheme).unwrap() - mean(&xs)).abs() < 1e-9);
            }
        }
        let t = language_summary(&scores);
        let all: Vec<f64> = scores.iter().filter(|s| s.scheme == Scheme::Hnmt).map(|s| s.bleu).collect();
        prop_assert!((t.mean(OVERALL_ROW, Scheme::Hnmt).unwrap() - mean(&all)).abs() < 1e-9);
        let gain = t.mean(OVERALL_ROW, Scheme::Hnmt).unwrap() - t.mean(OVERALL_ROW, Scheme::ManyToMany).unwrap();
        prop_assert!((t.improvement(OVERALL_ROW, Scheme::Hnmt).unwrap() - gain).abs() < 1e-9);
    }

    #[test]
    fn adding_a_mean_task_keeps_group_means(seed in any::<u64>()) {
        let mut scores = random_scores(seed);
        prop_assume!(!scores.is_empty());
        let before = language_summary(&scores);
        let src = scores[0].source.clone();
        let m = before.mean(&src, Scheme::Hnmt).unwrap();
        scores.push(score(&src, "xx", Scheme::Hnmt, 1, m, 10));
        let after = language_summary(&scores);
        prop_assert!((after.mean(&src, Scheme::Hnmt).unwrap() - m).abs() < 1e-9);
    }
}

#[test]
fn single_task_row_equals_its_bleu() {
    let s = vec![score("es", "en", Scheme::Hnmt, 1, 12.5, 700)];
    let t = language_summary(&s);
    assert_eq!(t.mean("es", Scheme::Hnmt), Some(12.5));
    assert!(t.improved_schemes().is_empty());
}

#[test]
fn similarity_groups_follow_the_tree() {
    let tree = sample_tree();
    let s = vec![
        score("es", "pt", Scheme::Hnmt, 1, 10.0, 10),
        score("en", "de", Scheme::Hnmt, 1, 20.0, 10),
        score("es", "fi", Scheme::Hnmt, 1, 3.0, 10),
    ];
    let t = group_by_similarity(&s, &tree).unwrap();
    let sim = |a, b| hnmt::langtree::similarity(&tree, a, b).unwrap().to_string();
    assert_eq!(t.mean(&sim("es", "pt"), Scheme::Hnmt), Some(if sim("es", "pt") == sim("en", "de") { 15.0 } else { 10.0 }));
    assert_eq!(t.mean(&sim("es", "fi"), Scheme::Hnmt), Some(3.0));
}

#[test]
fn t_test_against_closed_form() {
    // Three pairs with differences 1, 2, 3: t = 2 / (1 / sqrt 3), df = 2.
    let mut s = Vec::new();
    for (i, d) in [1.0, 2.0, 3.0].iter().enumerate() {
        let t = ["de", "es", "fi"][i];
        s.push(score("en", t, Scheme::ManyToMany, 1, 10.0, 5));
        s.push(score("en", t, Scheme::Hnmt, 1, 10.0 + d, 5));
    }
    let r = paired_t_test(&s, Scheme::ManyToMany, Scheme::Hnmt).unwrap();
    let t = 2.0 * 3f64.sqrt();
    assert!((r.t - t).abs() < 1e-12);
    // Student t with 2 degrees of freedom: two-sided p = 1 − t / sqrt(t² + 2).
    assert!((r.p_value - (1.0 - t / (t * t + 2.0).sqrt())).abs() < 1e-9);
    assert_eq!(r.df, 2);
}

#[test]
fn histogram_counts_every_score_once() {
    let s: Vec<TaskScore> = [0.0, 4.99, 5.0, 99.0, 100.0]
        .iter()
        .map(|b| score("en", "de", Scheme::Hnmt, 1, *b, 1))
        .collect();
    let h = histogram(&s, Scheme::Hnmt, 5.0);
    assert_eq!(h.len(), 20);
    assert_eq!(h.iter().map(|(_, c)| c).sum::<usize>(), 5);
    assert_eq!((h[0].1, h[1].1, h[19].1), (2, 1, 2));
}
