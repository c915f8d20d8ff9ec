use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;
use crate::langtree::{similarity, LanguageTree};
use crate::model::Scheme;

/// Test BLEU of one task under one scheme and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub source: String,
    pub target: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub bleu: f64,
    pub train_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub key: String,
    /// Scores per scheme, in the table's scheme order.
    pub counts: Vec<usize>,
    pub means: Vec<Option<f64>>,
}

/// Per-group mean BLEU of each scheme. Improvement columns compare every
/// other scheme with many-to-many.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisTable {
    pub group: String,
    pub schemes: Vec<Scheme>,
    pub rows: Vec<AnalysisRow>,
}

impl AnalysisTable {
    fn baseline(&self) -> Option<usize> {
        self.schemes.iter().position(|s| *s == Scheme::ManyToMany)
    }

    /// Schemes that get an improvement column.
    pub fn improved_schemes(&self) -> Vec<Scheme> {
        if self.schemes.len() < 2 || self.baseline().is_none() {
            return Vec::new();
        }
        self.schemes.iter().copied().filter(|s| *s != Scheme::ManyToMany).collect()
    }

    pub fn row(&self, key: &str) -> Option<&AnalysisRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    pub fn mean(&self, key: &str, scheme: Scheme) -> Option<f64> {
        let i = self.schemes.iter().position(|s| *s == scheme)?;
        self.row(key)?.means[i]
    }

    /// Mean of `scheme` minus the many-to-many mean in row `key`.
    pub fn improvement(&self, key: &str, scheme: Scheme) -> Option<f64> {
        let b = self.schemes[self.baseline()?];
        Some(self.mean(key, scheme)? - self.mean(key, b)?)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec![self.group.clone()];
        h.extend(self.schemes.iter().map(|s| s.to_string()));
        h.extend(self.improved_schemes().iter().map(|s| format!("improvement:{s}")));
        h.push("tasks".into());
        h
    }

    fn cells(&self, row: &AnalysisRow) -> Vec<String> {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
        let mut c = vec![row.key.clone()];
        c.extend(row.means.iter().map(|m| fmt(*m)));
        c.extend(self.improved_schemes().iter().map(|s| fmt(self.improvement(&row.key, *s))));
        c.push(row.counts.iter().max().copied().unwrap_or(0).to_string());
        c
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&self.cells(r).join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_pretty(&self) -> String {
        let mut grid = vec![self.header()];
        grid.extend(self.rows.iter().map(|r| self.cells(r)));
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in grid.iter().enumerate() {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        out
    }
}

fn schemes_of(scores: &[TaskScore]) -> Vec<Scheme> {
    Scheme::ALL.into_iter().filter(|s| scores.iter().any(|x| x.scheme == *s)).collect()
}

fn row(key: String, schemes: &[Scheme], members: &[&TaskScore]) -> AnalysisRow {
    let mut counts = Vec::new();
    let mut means = Vec::new();
    for s in schemes {
        let v: Vec<f64> = members.iter().filter(|x| x.scheme == *s).map(|x| x.bleu).collect();
        counts.push(v.len());
        means.push((!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64));
    }
    AnalysisRow { key, counts, means }
}

/// Groups scores by an ordered key; rows appear in key order.
fn grouped<K: Ord>(group: &str, scores: &[TaskScore], key: impl Fn(&TaskScore) -> (K, String)) -> AnalysisTable {
    let schemes = schemes_of(scores);
    let mut groups: BTreeMap<K, (String, Vec<&TaskScore>)> = BTreeMap::new();
    for s in scores {
        let (k, label) = key(s);
        groups.entry(k).or_insert_with(|| (label, Vec::new())).1.push(s);
    }
    AnalysisTable {
        group: group.to_string(),
        rows: groups.into_values().map(|(l, m)| row(l, &schemes, &m)).collect(),
        schemes,
    }
}

/// Lower edges of the default seven size buckets (training pairs).
pub const DEFAULT_SIZE_EDGES: [usize; 7] = [0, 1_000, 5_000, 10_000, 50_000, 100_000, 250_000];

/// Bucket label of `n` for ascending lower edges; each bucket includes its
/// lower edge.
pub fn size_bucket(n: usize, edges: &[usize]) -> (usize, String) {
    match edges.iter().rposition(|e| *e <= n) {
        None => (0, format!("<{}", edges.first().copied().unwrap_or(0))),
        Some(i) => {
            let label = match edges.get(i + 1) {
                Some(hi) => format!("{}-{}", edges[i], hi - 1),
                None => format!("{}+", edges[i]),
            };
            (i + 1, label)
        }
    }
}

pub fn group_by_size(scores: &[TaskScore], edges: &[usize]) -> AnalysisTable {
    grouped("train_pairs", scores, |s| size_bucket(s.train_pairs, edges))
}

pub fn group_by_similarity(scores: &[TaskScore], tree: &LanguageTree) -> Result<AnalysisTable, EvalError> {
    let mut sims = BTreeMap::new();
    for s in scores {
        let v = similarity(tree, &s.source, &s.target)?;
        sims.insert((s.source.clone(), s.target.clone()), v);
    }
    Ok(grouped("similarity", scores, |s| {
        let v = sims[&(s.source.clone(), s.target.clone())];
        (v, v.to_string())
    }))
}

pub const OVERALL_ROW: &str = "Average";

/// Mean BLEU per source language and scheme, plus an overall row that
/// averages every score of the scheme.
pub fn language_summary(scores: &[TaskScore]) -> AnalysisTable {
    let mut t = grouped("source", scores, |s| (s.source.clone(), s.source.clone()));
    let all: Vec<&TaskScore> = scores.iter().collect();
    t.rows.push(row(OVERALL_ROW.to_string(), &t.schemes, &all));
    t
}

/// Two-sided paired t-test between the per-task scores of two schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub scheme_a: Scheme,
    pub scheme_b: Scheme,
    pub pairs: usize,
    /// Mean of `b − a`.
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

impl PairedTTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }

    pub fn summary(&self) -> String {
        format!(
            "paired t-test {} vs {}: n={} mean_diff={:.4} t={:.4} df={} p={:.4}",
            self.scheme_b, self.scheme_a, self.pairs, self.mean_diff, self.t, self.df, self.p_value
        )
    }
}

/// Pairs scores by (source, target, seed).
pub fn paired_t_test(scores: &[TaskScore], a: Scheme, b: Scheme) -> Result<PairedTTest, EvalError> {
    let key = |s: &TaskScore| (s.source.clone(), s.target.clone(), s.seed);
    let first: BTreeMap<_, f64> = scores.iter().filter(|s| s.scheme == a).map(|s| (key(s), s.bleu)).collect();
    let diffs: Vec<f64> = scores
        .iter()
        .filter(|s| s.scheme == b)
        .filter_map(|s| first.get(&key(s)).map(|x| s.bleu - x))
        .collect();
    let n = diffs.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs(n));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let (t, p) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / n as f64).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df ≥ 1");
        (t, (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
    };
    Ok(PairedTTest {
        scheme_a: a,
        scheme_b: b,
        pairs: n,
        mean_diff: mean,
        t,
        df,
        p_value: p,
    })
}

/// Score histogram of one scheme: `(bin lower edge, count)` over 0–100.
/// A score of exactly 100 falls into the last bin.
pub fn histogram(scores: &[TaskScore], scheme: Scheme, width: f64) -> Vec<(f64, usize)> {
    let bins = (100.0 / width).ceil() as usize;
    let mut counts = vec![0usize; bins];
    for s in scores.iter().filter(|s| s.scheme == scheme) {
        let i = ((s.bleu / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (i as f64 * width, c)).collect()
}

pub fn histogram_csv(bins: &[(f64, usize)]) -> String {
    let mut out = String::from("bin,count\n");
    for (b, c) in bins {
        let _ = writeln!(out, "{b},{c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langtree::sample_tree;

    fn score(src: &str, tgt: &str, scheme: Scheme, bleu: f64, pairs: usize) -> TaskScore {
        TaskScore {
            source: src.into(),
            target: tgt.into(),
            scheme,
            seed: 1,
            bleu,
            train_pairs: pairs,
        }
    }

    #[test]
    fn overall_improvement_format() {
        let s = vec![
            score("es", "en", Scheme::ManyToMany, 5.186, 100),
            score("es", "en", Scheme::Hnmt, 6.254, 100),
        ];
        let t = language_summary(&s);
        let csv = t.to_csv();
        assert!(csv.starts_with("source,many-to-many,hnmt,improvement:hnmt,tasks\n"), "{csv}");
        assert!(csv.contains("Average,5.19,6.25,1.07,1\n"), "{csv}");
    }

    #[test]
    fn single_scheme_has_no_improvement() {
        let s = vec![score("es", "en", Scheme::Hnmt, 3.0, 10)];
        let t = language_summary(&s);
        assert!(t.improved_schemes().is_empty());
        assert!(!t.to_csv().contains("improvement"));
        assert_eq!(t.mean("es", Scheme::Hnmt), Some(3.0));
        assert_eq!(t.mean(OVERALL_ROW, Scheme::Hnmt), Some(3.0));
    }

    #[test]
    fn size_edges_are_lower_inclusive() {
        let e = DEFAULT_SIZE_EDGES;
        assert_eq!(size_bucket(999, &e).1, "0-999");
        assert_eq!(size_bucket(1000, &e).1, "1000-4999");
        assert_eq!(size_bucket(300_000, &e).1, "250000+");
        assert_eq!(size_bucket(3, &[5, 10]).1, "<5");
        let s = vec![
            score("a", "b", Scheme::Hnmt, 1.0, 10),
            score("a", "c", Scheme::Hnmt, 3.0, 20),
        ];
        assert_eq!(group_by_size(&s, &e).rows.len(), 1);
    }

    #[test]
    fn similarity_rows() {
        let tree = sample_tree();
        let s = vec![
            score("en", "de", Scheme::Hnmt, 4.0, 10),
            score("fi", "en", Scheme::Hnmt, 2.0, 10),
        ];
        let t = group_by_similarity(&s, &tree).unwrap();
        assert_eq!(t.mean("2", Scheme::Hnmt), Some(4.0));
        assert_eq!(t.mean("0", Scheme::Hnmt), Some(2.0));
        let bad = vec![score("xx", "en", Scheme::Hnmt, 1.0, 1)];
        assert!(group_by_similarity(&bad, &tree).is_err());
    }

    #[test]
    fn t_test_identical_runs() {
        let mut s = Vec::new();
        for (i, b) in [1.0, 2.0, 5.0].iter().enumerate() {
            let tgt = format!("t{i}");
            s.push(score("a", &tgt, Scheme::ManyToMany, *b, 1));
            s.push(score("a", &tgt, Scheme::Hnmt, *b, 1));
        }
        let r = paired_t_test(&s, Scheme::ManyToMany, Scheme::Hnmt).unwrap();
        assert_eq!((r.p_value, r.mean_diff), (1.0, 0.0));
    }

    #[test]
    fn t_test_matches_hand_value() {
        // diffs 1, 2, 3: mean 2, sd 1, t = 2·√3, df 2.
        let mut s = Vec::new();
        for (i, d) in [1.0, 2.0, 3.0].iter().enumerate() {
            let tgt = format!("t{i}");
            s.push(score("a", &tgt, Scheme::ManyToMany, 10.0, 1));
            s.push(score("a", &tgt, Scheme::Hnmt, 10.0 + d, 1));
        }
        let r = paired_t_test(&s, Scheme::ManyToMany, Scheme::Hnmt).unwrap();
        let t = 2.0 * 3f64.sqrt();
        assert!((r.t - t).abs() < 1e-12);
        // Two-sided p for Student's t with 2 df: 1 − t/√(t² + 2).
        assert!((r.p_value - (1.0 - t / (t * t + 2.0).sqrt())).abs() < 1e-9);
    }

    #[test]
    fn histogram_bins() {
        let s = vec![
            score("a", "b", Scheme::Hnmt, 0.0, 1),
            score("a", "c", Scheme::Hnmt, 4.99, 1),
            score("a", "d", Scheme::Hnmt, 100.0, 1),
        ];
        let h = histogram(&s, Scheme::Hnmt, 5.0);
        assert_eq!(h.len(), 20);
        assert_eq!(h[0], (0.0, 2));
        assert_eq!(h[19], (95.0, 1));
        assert!(histogram_csv(&h).starts_with("bin,count\n0,2\n"));
    }
}
