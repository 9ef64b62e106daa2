//! Label propagation to zero-shot pairs through a shared source language.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{tokenize, FormalityLabel, LabeledCorpus};
use crate::error::{Error, Result};
use crate::textio::{self, escape_field, fmt_f64, read_lines, unescape_field};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub source: String,
    pub target_a: String,
    pub target_b: String,
    pub label_a: FormalityLabel,
    pub label_b: FormalityLabel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripletCorpus {
    pub triplets: Vec<Triplet>,
    pub coverage_a: f64,
    pub coverage_b: f64,
    pub size_a: usize,
    pub size_b: usize,
    pub duplicates_dropped_a: usize,
    pub duplicates_dropped_b: usize,
}

/// Join key: the source with whitespace runs collapsed to single spaces.
pub fn join_key(source: &str) -> String {
    tokenize(source).join(" ")
}

fn first_occurrences(corpus: &LabeledCorpus) -> (Vec<usize>, usize) {
    let mut seen = HashMap::new();
    let mut keep = Vec::new();
    let mut dropped = 0;
    for (i, (pair, _)) in corpus.pairs.iter().enumerate() {
        if seen.insert(join_key(&pair.source), i).is_none() {
            keep.push(i);
        } else {
            dropped += 1;
        }
    }
    (keep, dropped)
}

/// Joins two labeled corpora on their source side. Output follows the order of `a`.
pub fn intersect_on_source(a: &LabeledCorpus, b: &LabeledCorpus) -> TripletCorpus {
    let (keep_a, duplicates_dropped_a) = first_occurrences(a);
    let (keep_b, duplicates_dropped_b) = first_occurrences(b);
    let b_index: HashMap<String, usize> = keep_b
        .iter()
        .map(|&i| (join_key(&b.pairs[i].0.source), i))
        .collect();
    let triplets: Vec<Triplet> = keep_a
        .iter()
        .filter_map(|&i| {
            let (pa, la) = &a.pairs[i];
            let j = *b_index.get(&join_key(&pa.source))?;
            let (pb, lb) = &b.pairs[j];
            Some(Triplet {
                source: pa.source.clone(),
                target_a: pa.target.clone(),
                target_b: pb.target.clone(),
                label_a: *la,
                label_b: *lb,
            })
        })
        .collect();
    let fraction = |n: usize, of: usize| if of == 0 { 0.0 } else { n as f64 / of as f64 };
    TripletCorpus {
        coverage_a: fraction(triplets.len(), a.len()),
        coverage_b: fraction(triplets.len(), b.len()),
        size_a: a.len(),
        size_b: b.len(),
        duplicates_dropped_a,
        duplicates_dropped_b,
        triplets,
    }
}

impl TripletCorpus {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Coverage statement, e.g. `85.72% of sentence pairs from a`.
    pub fn coverage_summary(&self, name_a: &str, name_b: &str) -> String {
        format!(
            "{} triplets: {:.2}% of sentence pairs from {name_a} and {:.2}% from {name_b}",
            self.len(),
            self.coverage_a * 100.0,
            self.coverage_b * 100.0
        )
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# size_a={}", self.size_a);
        let _ = writeln!(out, "# size_b={}", self.size_b);
        let _ = writeln!(out, "# coverage_a={}", fmt_f64(self.coverage_a));
        let _ = writeln!(out, "# coverage_b={}", fmt_f64(self.coverage_b));
        let _ = writeln!(out, "# duplicates_dropped_a={}", self.duplicates_dropped_a);
        let _ = writeln!(out, "# duplicates_dropped_b={}", self.duplicates_dropped_b);
        for t in &self.triplets {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                escape_field(&t.source),
                escape_field(&t.target_a),
                escape_field(&t.target_b),
                t.label_a.code(),
                t.label_b.code()
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_string(path, &self.to_tsv())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut out = TripletCorpus::default();
        for (i, line) in read_lines(path)?.iter().enumerate() {
            let ln = i + 1;
            if let Some(meta) = line.strip_prefix("# ") {
                let Some((key, value)) = meta.split_once('=') else {
                    continue;
                };
                match key {
                    "size_a" => out.size_a = textio::parse_usize(value, ln, key)?,
                    "size_b" => out.size_b = textio::parse_usize(value, ln, key)?,
                    "coverage_a" => out.coverage_a = textio::parse_f64(value, ln, key)?,
                    "coverage_b" => out.coverage_b = textio::parse_f64(value, ln, key)?,
                    "duplicates_dropped_a" => {
                        out.duplicates_dropped_a = textio::parse_usize(value, ln, key)?
                    }
                    "duplicates_dropped_b" => {
                        out.duplicates_dropped_b = textio::parse_usize(value, ln, key)?
                    }
                    _ => {}
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    line: ln,
                    message: "expected `source, target_a, target_b, label_a, label_b`".into(),
                });
            }
            let label = |s: &str| {
                FormalityLabel::parse(s).ok_or_else(|| Error::Parse {
                    line: ln,
                    message: format!("unknown label `{s}`"),
                })
            };
            out.triplets.push(Triplet {
                source: unescape_field(fields[0]),
                target_a: unescape_field(fields[1]),
                target_b: unescape_field(fields[2]),
                label_a: label(fields[3])?,
                label_b: label(fields[4])?,
            });
        }
        Ok(out)
    }
}

/// Table rows in display order; `None` stands for "no label".
pub const COMBINATIONS: [(FormalityLabel, FormalityLabel); 8] = {
    use FormalityLabel::*;
    [
        (Formal, Formal),
        (Informal, Informal),
        (Formal, Informal),
        (Informal, Formal),
        (Formal, None),
        (Informal, None),
        (None, Formal),
        (None, Informal),
    ]
};

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationStats {
    /// Counts aligned with [`COMBINATIONS`].
    pub counts: [usize; 8],
    pub unannotated: usize,
    pub total: usize,
}

pub fn combination_stats(t: &TripletCorpus) -> CombinationStats {
    let mut counts = [0usize; 8];
    let mut unannotated = 0;
    for triplet in &t.triplets {
        let key = (triplet.label_a, triplet.label_b);
        match COMBINATIONS.iter().position(|c| *c == key) {
            Some(i) => counts[i] += 1,
            None => unannotated += 1,
        }
    }
    CombinationStats {
        counts,
        unannotated,
        total: t.len(),
    }
}

fn symbol(label: FormalityLabel) -> &'static str {
    match label {
        FormalityLabel::Formal => "F",
        FormalityLabel::Informal => "I",
        FormalityLabel::None => "∅",
    }
}

impl CombinationStats {
    pub fn count(&self, a: FormalityLabel, b: FormalityLabel) -> usize {
        COMBINATIONS
            .iter()
            .position(|c| *c == (a, b))
            .map_or(self.unannotated, |i| self.counts[i])
    }

    /// Triplets with at least one side labeled.
    pub fn annotated(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn both_annotated(&self) -> usize {
        self.counts[..4].iter().sum()
    }

    pub fn agreeing(&self) -> usize {
        self.counts[0] + self.counts[1]
    }

    /// Percentage of the annotated base; `None` when nothing is annotated.
    pub fn percent_of_annotated(&self, row: usize) -> Option<f64> {
        let base = self.annotated();
        (base > 0).then(|| 100.0 * self.counts[row] as f64 / base as f64)
    }

    pub fn percent_of_all(&self, row: usize) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.counts[row] as f64 / self.total as f64)
    }

    pub fn both_annotated_fraction(&self) -> Option<f64> {
        let base = self.annotated();
        (base > 0).then(|| self.both_annotated() as f64 / base as f64)
    }

    pub fn agreement_fraction(&self) -> Option<f64> {
        let both = self.both_annotated();
        (both > 0).then(|| self.agreeing() as f64 / both as f64)
    }

    /// One row per combination: `a b count pct%` (percent of the annotated base).
    pub fn render_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("undefined".to_owned(), |p| format!("{p:.2}%"));
        let mut out = String::new();
        for (row, (a, b)) in COMBINATIONS.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                symbol(*a),
                symbol(*b),
                self.counts[row],
                pct(self.percent_of_annotated(row))
            );
        }
        let _ = writeln!(
            out,
            "annotated {} of {} triplets",
            self.annotated(),
            self.total
        );
        let _ = writeln!(
            out,
            "both annotated {} ({})",
            self.both_annotated(),
            self.both_annotated_fraction()
                .map_or("undefined".to_owned(), |f| format!("{:.2}%", f * 100.0))
        );
        let _ = writeln!(
            out,
            "agreement among both annotated {} ({})",
            self.agreeing(),
            self.agreement_fraction()
                .map_or("undefined".to_owned(), |f| format!("{:.2}%", f * 100.0))
        );
        out
    }

    /// TSV with both percentage bases.
    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("undefined".to_owned(), fmt_f64);
        let mut out = String::from("label_a\tlabel_b\tcount\tpct_of_annotated\tpct_of_all\n");
        for (row, (a, b)) in COMBINATIONS.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                a.code(),
                b.code(),
                self.counts[row],
                opt(self.percent_of_annotated(row)),
                opt(self.percent_of_all(row))
            );
        }
        let _ = writeln!(out, "# total={}", self.total);
        let _ = writeln!(out, "# unannotated={}", self.unannotated);
        let _ = writeln!(out, "# annotated={}", self.annotated());
        let _ = writeln!(out, "# both_annotated={}", self.both_annotated());
        let _ = writeln!(
            out,
            "# both_annotated_fraction={}",
            opt(self.both_annotated_fraction())
        );
        let _ = writeln!(
            out,
            "# agreement_fraction={}",
            opt(self.agreement_fraction())
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PivotSeeds {
    pub formal_sources: Vec<String>,
    pub informal_sources: Vec<String>,
}

/// Sources labeled formal on both sides, and informal on both sides.
pub fn pivot_in_domain_sets(t: &TripletCorpus) -> PivotSeeds {
    let pick = |label: FormalityLabel| -> Vec<String> {
        t.triplets
            .iter()
            .filter(|x| x.label_a == label && x.label_b == label)
            .map(|x| x.source.clone())
            .collect()
    };
    PivotSeeds {
        formal_sources: pick(FormalityLabel::Formal),
        informal_sources: pick(FormalityLabel::Informal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentencePair;
    use FormalityLabel::*;

    fn labeled(rows: &[(&str, &str, FormalityLabel)]) -> LabeledCorpus {
        LabeledCorpus {
            pairs: rows
                .iter()
                .enumerate()
                .map(|(i, (s, t, l))| (SentencePair::new(i, *s, *t), *l))
                .collect(),
        }
    }

    fn triplets(labels: &[(FormalityLabel, FormalityLabel)]) -> TripletCorpus {
        TripletCorpus {
            triplets: labels
                .iter()
                .enumerate()
                .map(|(i, (a, b))| Triplet {
                    source: format!("s{i}"),
                    target_a: format!("a{i}"),
                    target_b: format!("b{i}"),
                    label_a: *a,
                    label_b: *b,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn full_overlap() {
        let a = labeled(&[("hi", "x", Formal)]);
        let b = labeled(&[("hi", "y", Informal)]);
        let t = intersect_on_source(&a, &b);
        assert_eq!(
            t.triplets,
            vec![Triplet {
                source: "hi".into(),
                target_a: "x".into(),
                target_b: "y".into(),
                label_a: Formal,
                label_b: Informal,
            }]
        );
        assert_eq!((t.coverage_a, t.coverage_b), (1.0, 1.0));
    }

    #[test]
    fn disjoint_sources() {
        let t = intersect_on_source(
            &labeled(&[("a", "x", Formal)]),
            &labeled(&[("b", "y", Formal)]),
        );
        assert!(t.is_empty());
        assert_eq!((t.coverage_a, t.coverage_b), (0.0, 0.0));
    }

    #[test]
    fn whitespace_normalized_join_keeps_first_duplicate() {
        let a = labeled(&[
            ("hi  there", "x1", Formal),
            ("hi there", "x2", Informal),
            ("z", "x3", None),
        ]);
        let b = labeled(&[("hi there ", "y", None), ("q", "y2", Formal)]);
        let t = intersect_on_source(&a, &b);
        assert_eq!(t.len(), 1);
        assert_eq!(t.triplets[0].target_a, "x1");
        assert_eq!(t.duplicates_dropped_a, 1);
        assert!((t.coverage_a - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.coverage_b, 0.5);
    }

    #[test]
    fn coverage_statement_format() {
        let t = TripletCorpus {
            coverage_a: 0.8572,
            coverage_b: 0.7413,
            ..Default::default()
        };
        assert!(t
            .coverage_summary("en-de", "en-es")
            .contains("85.72% of sentence pairs from en-de"));
    }

    #[test]
    fn four_triplet_tabulation() {
        let t = triplets(&[
            (Formal, Formal),
            (Formal, Informal),
            (Formal, None),
            (None, None),
        ]);
        let stats = combination_stats(&t);
        assert_eq!(stats.count(Formal, Formal), 1);
        assert_eq!(stats.count(Formal, Informal), 1);
        assert_eq!(stats.count(Formal, None), 1);
        assert_eq!(stats.annotated(), 3);
        assert_eq!(stats.both_annotated(), 2);
        assert!((stats.both_annotated_fraction().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(stats.agreement_fraction(), Some(0.5));

        let seeds = pivot_in_domain_sets(&t);
        assert_eq!(seeds.formal_sources, vec!["s0"]);
        assert!(seeds.informal_sources.is_empty());
    }

    #[test]
    fn empty_base_is_undefined() {
        let stats = combination_stats(&triplets(&[(None, None), (None, None)]));
        assert_eq!(stats.counts, [0; 8]);
        assert_eq!(stats.both_annotated_fraction(), Option::None);
        assert!(stats.render_table().contains("F F 0 undefined"));
    }

    #[test]
    fn table_row_shape() {
        let mut labels = vec![(Formal, Formal); 845];
        labels.extend(vec![(Formal, None); 29_651 - 845]);
        let stats = combination_stats(&triplets(&labels));
        let first = stats.render_table().lines().next().unwrap().to_owned();
        assert_eq!(first, "F F 845 2.85%");
    }

    #[test]
    fn triplet_tsv_round_trips() {
        let mut t = intersect_on_source(
            &labeled(&[("a\tb", "x", Formal), ("c", "y", None)]),
            &labeled(&[("a\tb", "u", Informal), ("c", "v", Formal)]),
        );
        t.duplicates_dropped_b = 2;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        t.save(&path).unwrap();
        assert_eq!(TripletCorpus::load(&path).unwrap(), t);
    }
}
