//! Relative-frequency formality lexicon and n-best reranking.
//!
//! For a term `t` with counts `F(t)` in the formal side and `I(t)` in the
//! informal side, `count(t) = F(t) + I(t)` and
//!
//! ```text
//! β(t)      = |F(t) − I(t)| / max_u |F(u) − I(u)|
//! κ(t)      = 0 if |F(t) − I(t)| / count(t) < threshold, else 1
//! p(F | t)  = F(t) / count(t) · β(t) · κ(t)
//! p(I | t)  = I(t) / count(t) · β(t) · κ(t)
//! ```
//!
//! A hypothesis `Y` requested in register `c` is rescored as
//! `base(Y) + λ · (Σ p(c | y) − Σ p(ĉ | y))`, summing over its tokens.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::corpus::{tokenize, Formality};
use crate::error::{Error, Result};
use crate::scorer::{judge_in_context, AnnotatedReference, Verdict};
use crate::textio::{self, fmt_f64, read_lines};

pub const DEFAULT_KAPPA_THRESHOLD: f64 = 0.33;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermStats {
    pub f_count: u64,
    pub i_count: u64,
    pub beta: f64,
    pub kappa: u8,
    pub p_formal: f64,
    pub p_informal: f64,
}

impl TermStats {
    pub fn count(&self) -> u64 {
        self.f_count + self.i_count
    }

    pub fn probability(&self, context: Formality) -> f64 {
        match context {
            Formality::Formal => self.p_formal,
            Formality::Informal => self.p_informal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalityLexicon {
    terms: BTreeMap<String, TermStats>,
    max_abs_diff: u64,
    kappa_threshold: f64,
}

pub fn build_lexicon<F, I>(
    formal_targets: F,
    informal_targets: I,
    kappa_threshold: f64,
) -> Result<FormalityLexicon>
where
    F: IntoIterator,
    F::Item: AsRef<str>,
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut sentences = 0usize;
    for s in formal_targets {
        sentences += 1;
        for t in tokenize(s.as_ref()) {
            counts.entry(t.to_owned()).or_default().0 += 1;
        }
    }
    for s in informal_targets {
        sentences += 1;
        for t in tokenize(s.as_ref()) {
            counts.entry(t.to_owned()).or_default().1 += 1;
        }
    }
    if sentences == 0 {
        return Err(Error::Training(
            "lexicon needs at least one formal or informal sentence".into(),
        ));
    }
    FormalityLexicon::from_counts(counts, kappa_threshold)
}

impl FormalityLexicon {
    pub fn from_counts(counts: BTreeMap<String, (u64, u64)>, kappa_threshold: f64) -> Result<Self> {
        if !kappa_threshold.is_finite() || kappa_threshold < 0.0 {
            return Err(Error::Argument(format!(
                "kappa threshold must be a non-negative number, got {kappa_threshold}"
            )));
        }
        let max_abs_diff = counts
            .values()
            .map(|&(f, i)| f.abs_diff(i))
            .max()
            .unwrap_or(0);
        let terms = counts
            .into_iter()
            .filter(|(_, (f, i))| f + i > 0)
            .map(|(term, (f, i))| {
                let count = (f + i) as f64;
                let diff = f.abs_diff(i) as f64;
                let beta = if max_abs_diff == 0 {
                    0.0
                } else {
                    diff / max_abs_diff as f64
                };
                let kappa = u8::from(diff / count >= kappa_threshold);
                let weight = beta * f64::from(kappa);
                let stats = TermStats {
                    f_count: f,
                    i_count: i,
                    beta,
                    kappa,
                    p_formal: f as f64 / count * weight,
                    p_informal: i as f64 / count * weight,
                };
                (term, stats)
            })
            .collect();
        Ok(FormalityLexicon {
            terms,
            max_abs_diff,
            kappa_threshold,
        })
    }

    pub fn empty() -> Self {
        FormalityLexicon {
            terms: BTreeMap::new(),
            max_abs_diff: 0,
            kappa_threshold: DEFAULT_KAPPA_THRESHOLD,
        }
    }

    pub fn get(&self, term: &str) -> Option<&TermStats> {
        self.terms.get(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_diff(&self) -> u64 {
        self.max_abs_diff
    }

    pub fn kappa_threshold(&self) -> f64 {
        self.kappa_threshold
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &TermStats)> {
        self.terms.iter().map(|(t, s)| (t.as_str(), s))
    }

    pub fn term_probability(&self, term: &str, context: Formality) -> f64 {
        self.terms.get(term).map_or(0.0, |s| s.probability(context))
    }

    /// Sum of per-token class probabilities.
    pub fn sentence_score(&self, text: &str, context: Formality) -> f64 {
        tokenize(text)
            .into_iter()
            .map(|t| self.term_probability(t, context))
            .sum()
    }

    pub fn hypothesis_formality_score(&self, hyp: &Hypothesis, context: Formality) -> f64 {
        self.sentence_score(&hyp.text, context)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kappa_threshold={}", fmt_f64(self.kappa_threshold));
        let _ = writeln!(out, "# max_abs_diff={}", self.max_abs_diff);
        out.push_str("term\tf_count\ti_count\tbeta\tkappa\tp_formal\tp_informal\n");
        for (term, s) in &self.terms {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                textio::escape_field(term),
                s.f_count,
                s.i_count,
                fmt_f64(s.beta),
                s.kappa,
                fmt_f64(s.p_formal),
                fmt_f64(s.p_informal)
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_string(path, &self.to_tsv())
    }

    /// Reads counts and threshold back; derived columns are recomputed.
    pub fn load(path: &Path) -> Result<Self> {
        let mut threshold = DEFAULT_KAPPA_THRESHOLD;
        let mut counts = BTreeMap::new();
        for (i, line) in read_lines(path)?.iter().enumerate() {
            let ln = i + 1;
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("kappa_threshold=") {
                    threshold = textio::parse_f64(v, ln, "kappa_threshold")?;
                }
                continue;
            }
            if line.is_empty() || line.starts_with("term\t") {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: ln,
                    message: "expected `term, f_count, i_count, …`".into(),
                });
            }
            let f = textio::parse_usize(fields[1], ln, "f_count")? as u64;
            let c = textio::parse_usize(fields[2], ln, "i_count")? as u64;
            counts.insert(textio::unescape_field(fields[0]), (f, c));
        }
        Self::from_counts(counts, threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub text: String,
    pub base_score: f64,
    pub rank: usize,
    pub quality_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    pub sample_id: String,
    pub hypotheses: Vec<Hypothesis>,
}

const FIELD_SEP: &str = "|||";

/// Parses `sample_id ||| rank ||| base_score ||| text [||| quality]` lines.
/// Hypotheses of one sample must be contiguous with ranks 0..k−1 in order and
/// non-increasing base scores.
pub fn parse_nbest(lines: &[String]) -> Result<Vec<NBestList>> {
    let mut lists: Vec<NBestList> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.iter().enumerate() {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: ln, message };
        let fields: Vec<&str> = line.split(FIELD_SEP).map(str::trim).collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(err(format!(
                "expected 4 or 5 `|||` fields, found {}",
                fields.len()
            )));
        }
        let rank = textio::parse_usize(fields[1], ln, "rank")?;
        let base_score = textio::parse_f64(fields[2], ln, "base score")?;
        let quality_score = match fields.get(4) {
            Some(q) => Some(textio::parse_f64(q, ln, "quality score")?),
            None => None,
        };
        let hyp = Hypothesis {
            text: fields[3].to_owned(),
            base_score,
            rank,
            quality_score,
        };
        let sample_id = fields[0];
        match lists.last_mut() {
            Some(list) if list.sample_id == sample_id => {
                let prev = list.hypotheses.last().expect("lists are never empty");
                if rank != list.hypotheses.len() {
                    return Err(err(format!(
                        "sample `{sample_id}`: expected rank {}, found {rank}",
                        list.hypotheses.len()
                    )));
                }
                if base_score > prev.base_score {
                    return Err(err(format!(
                        "sample `{sample_id}`: base score rises from {} to {base_score} at rank {rank}",
                        prev.base_score
                    )));
                }
                list.hypotheses.push(hyp);
            }
            _ => {
                if !seen.insert(sample_id.to_owned()) {
                    return Err(err(format!(
                        "sample `{sample_id}` appears in more than one block"
                    )));
                }
                if rank != 0 {
                    return Err(err(format!(
                        "sample `{sample_id}` must start at rank 0, found {rank}"
                    )));
                }
                lists.push(NBestList {
                    sample_id: sample_id.to_owned(),
                    hypotheses: vec![hyp],
                });
            }
        }
    }
    Ok(lists)
}

pub fn load_nbest(path: &Path) -> Result<Vec<NBestList>> {
    parse_nbest(&read_lines(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankedHypothesis {
    pub hypothesis: Hypothesis,
    pub combined_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankedList {
    pub sample_id: String,
    pub hypotheses: Vec<RerankedHypothesis>,
}

impl RerankedList {
    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0].hypothesis
    }
}

pub fn combined_score(
    lex: &FormalityLexicon,
    hyp: &Hypothesis,
    context: Formality,
    lambda: f64,
) -> f64 {
    let toward = lex.sentence_score(&hyp.text, context);
    let away = lex.sentence_score(&hyp.text, context.opposite());
    hyp.base_score + lambda * (toward - away)
}

/// Reorders hypotheses by combined score, descending; ties keep original rank order.
pub fn rerank_nbest(
    lex: &FormalityLexicon,
    list: &NBestList,
    context: Formality,
    lambda: f64,
) -> Result<RerankedList> {
    rerank_top(lex, list, list.hypotheses.len(), context, lambda)
}

fn rerank_top(
    lex: &FormalityLexicon,
    list: &NBestList,
    k: usize,
    context: Formality,
    lambda: f64,
) -> Result<RerankedList> {
    if list.hypotheses.is_empty() {
        return Err(Error::Argument(format!(
            "n-best list `{}` is empty",
            list.sample_id
        )));
    }
    let mut hypotheses: Vec<RerankedHypothesis> = list
        .hypotheses
        .iter()
        .take(k)
        .map(|h| RerankedHypothesis {
            combined_score: combined_score(lex, h, context, lambda),
            hypothesis: h.clone(),
        })
        .collect();
    hypotheses.sort_by(|a, b| {
        b.combined_score
            .total_cmp(&a.combined_score)
            .then(a.hypothesis.rank.cmp(&b.hypothesis.rank))
    });
    Ok(RerankedList {
        sample_id: list.sample_id.clone(),
        hypotheses,
    })
}

/// Writes reranked lists in n-best format, new rank and combined score in place
/// of the originals.
pub fn reranked_to_nbest(lists: &[RerankedList]) -> String {
    let mut out = String::new();
    for list in lists {
        for (rank, h) in list.hypotheses.iter().enumerate() {
            let _ = write!(
                out,
                "{} ||| {} ||| {} ||| {}",
                list.sample_id,
                rank,
                fmt_f64(h.combined_score),
                h.hypothesis.text
            );
            if let Some(q) = h.hypothesis.quality_score {
                let _ = write!(out, " ||| {}", fmt_f64(q));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCell {
    pub accuracy: Option<f64>,
    pub evaluated: usize,
    /// Mean external quality of the picked hypotheses, when every pick has one.
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub k: usize,
    pub model: AccuracyCell,
    pub oracle: AccuracyCell,
    pub reranked: Option<AccuracyCell>,
    pub delta_to_best: f64,
    pub n_cases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    /// Lists shorter than the largest k.
    pub truncated_lists: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RerankSettings<'a> {
    pub lexicon: &'a FormalityLexicon,
    pub lambda: f64,
}

fn accuracy_cell(verdicts: &[Verdict], qualities: &[Option<f64>]) -> AccuracyCell {
    let correct = verdicts.iter().filter(|v| **v == Verdict::Correct).count();
    let evaluated = verdicts.iter().filter(|v| **v != Verdict::Skipped).count();
    let quality = qualities
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
        .filter(|q| !q.is_empty())
        .map(|q| q.iter().sum::<f64>() / q.len() as f64);
    AccuracyCell {
        accuracy: (evaluated > 0).then(|| correct as f64 / evaluated as f64),
        evaluated,
        quality,
    }
}

/// For each k: the beam's top hypothesis (model), the first correct hypothesis
/// in the top k falling back to rank 0 (oracle), and optionally the top of the
/// reranked top-k list.
pub fn oracle_experiment(
    lists: &[NBestList],
    formal_refs: &[AnnotatedReference],
    informal_refs: &[AnnotatedReference],
    contexts: &[Formality],
    ks: &[usize],
    rerank: Option<RerankSettings<'_>>,
) -> Result<OracleReport> {
    if ks.is_empty() {
        return Err(Error::Argument(
            "oracle experiment needs at least one k".into(),
        ));
    }
    if ks.contains(&0) {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    for (what, len) in [
        ("n-best lists vs formal references", formal_refs.len()),
        ("n-best lists vs informal references", informal_refs.len()),
        ("n-best lists vs contexts", contexts.len()),
    ] {
        if len != lists.len() {
            return Err(Error::LengthMismatch {
                what,
                left: lists.len(),
                right: len,
            });
        }
    }
    let max_k = *ks.iter().max().expect("ks is non-empty");
    let truncated_lists = lists.iter().filter(|l| l.hypotheses.len() < max_k).count();
    if truncated_lists > 0 {
        warn!("{truncated_lists} n-best lists have fewer than {max_k} hypotheses; using what is there");
    }

    // verdicts[s][r]: judgment of hypothesis at beam rank r of sample s.
    let verdicts: Vec<Vec<Verdict>> = lists
        .par_iter()
        .enumerate()
        .map(|(s, list)| {
            if list.hypotheses.is_empty() {
                return Err(Error::Argument(format!(
                    "n-best list `{}` is empty",
                    list.sample_id
                )));
            }
            list.hypotheses
                .iter()
                .take(max_k)
                .map(|h| {
                    judge_in_context(&h.text, &formal_refs[s], &informal_refs[s], contexts[s])
                        .map(|j| j.verdict)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let rows = ks
        .iter()
        .map(|&k| -> Result<OracleRow> {
            let mut model = Vec::with_capacity(lists.len());
            let mut model_q = Vec::with_capacity(lists.len());
            let mut oracle = Vec::with_capacity(lists.len());
            let mut oracle_q = Vec::with_capacity(lists.len());
            let mut reranked = Vec::new();
            let mut reranked_q = Vec::new();
            let mut distances = Vec::new();
            for (s, list) in lists.iter().enumerate() {
                let pool = &verdicts[s][..k.min(verdicts[s].len())];
                model.push(pool[0]);
                model_q.push(list.hypotheses[0].quality_score);
                let first_correct = pool.iter().position(|v| *v == Verdict::Correct);
                let pick = first_correct.unwrap_or(0);
                oracle.push(pool[pick]);
                oracle_q.push(list.hypotheses[pick].quality_score);
                if pool[0] == Verdict::Incorrect {
                    if let Some(r) = first_correct {
                        distances.push(r as f64);
                    }
                }
                if let Some(settings) = rerank {
                    let top = rerank_top(settings.lexicon, list, k, contexts[s], settings.lambda)?;
                    let best = top.best();
                    reranked.push(pool[best.rank]);
                    reranked_q.push(best.quality_score);
                }
            }
            let n_cases = distances.len();
            let delta_to_best = if n_cases == 0 {
                0.0
            } else {
                distances.iter().sum::<f64>() / n_cases as f64
            };
            Ok(OracleRow {
                k,
                model: accuracy_cell(&model, &model_q),
                oracle: accuracy_cell(&oracle, &oracle_q),
                reranked: rerank.map(|_| accuracy_cell(&reranked, &reranked_q)),
                delta_to_best,
                n_cases,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        rows,
        truncated_lists,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "undefined".into())
}

impl OracleReport {
    /// One row per k.
    pub fn to_tsv(&self) -> String {
        let with_rerank = self.rows.iter().any(|r| r.reranked.is_some());
        let mut out = String::from("k\tmodel_acc\toracle_acc");
        if with_rerank {
            out.push_str("\treranked_acc");
        }
        out.push_str("\tdelta_to_best\tn_cases\tmodel_evaluated\toracle_evaluated");
        if with_rerank {
            out.push_str("\treranked_evaluated");
        }
        out.push_str("\tmodel_quality\toracle_quality");
        if with_rerank {
            out.push_str("\treranked_quality");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{}\t{}\t{}",
                r.k,
                fmt_opt(r.model.accuracy),
                fmt_opt(r.oracle.accuracy)
            );
            if let Some(c) = &r.reranked {
                let _ = write!(out, "\t{}", fmt_opt(c.accuracy));
            }
            let _ = write!(
                out,
                "\t{}\t{}\t{}\t{}",
                fmt_f64(r.delta_to_best),
                r.n_cases,
                r.model.evaluated,
                r.oracle.evaluated
            );
            if let Some(c) = &r.reranked {
                let _ = write!(out, "\t{}", c.evaluated);
            }
            let _ = write!(
                out,
                "\t{}\t{}",
                fmt_opt(r.model.quality),
                fmt_opt(r.oracle.quality)
            );
            if let Some(c) = &r.reranked {
                let _ = write!(out, "\t{}", fmt_opt(c.quality));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::parse_annotated;

    fn fixture() -> FormalityLexicon {
        build_lexicon(
            ["Sie sind", "Sie kommen", "Sie"],
            ["du kommst"],
            DEFAULT_KAPPA_THRESHOLD,
        )
        .unwrap()
    }

    fn hyp(text: &str, base: f64, rank: usize) -> Hypothesis {
        Hypothesis {
            text: text.into(),
            base_score: base,
            rank,
            quality_score: None,
        }
    }

    #[test]
    fn lexicon_matches_hand_values() {
        let lex = fixture();
        assert_eq!(lex.max_abs_diff(), 3);
        let sie = lex.get("Sie").unwrap();
        assert_eq!((sie.f_count, sie.i_count, sie.kappa), (3, 0, 1));
        assert!((sie.beta - 1.0).abs() < 1e-12);
        assert!((sie.p_formal - 1.0).abs() < 1e-12);
        assert_eq!(sie.p_informal, 0.0);
        let kommen = lex.get("kommen").unwrap();
        assert!((kommen.beta - 1.0 / 3.0).abs() < 1e-12);
        assert!((kommen.p_formal - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_term_is_nullified() {
        let lex = build_lexicon(["ja Sie Sie"], ["ja du"], DEFAULT_KAPPA_THRESHOLD).unwrap();
        let ja = lex.get("ja").unwrap();
        assert_eq!(ja.kappa, 0);
        assert_eq!((ja.p_formal, ja.p_informal), (0.0, 0.0));
    }

    #[test]
    fn empty_inputs_fail() {
        let none: [&str; 0] = [];
        assert!(build_lexicon(none, none, 0.33).is_err());
    }

    #[test]
    fn term_probabilities() {
        let lex = fixture();
        assert_eq!(lex.term_probability("Sie", Formality::Formal), 1.0);
        assert_eq!(lex.term_probability("Sie", Formality::Informal), 0.0);
        assert_eq!(lex.term_probability("Haus", Formality::Formal), 0.0);
    }

    #[test]
    fn hypothesis_scores_sum_tokens() {
        let lex = fixture();
        let s = lex.hypothesis_formality_score(&hyp("Sie kommen heute", 0.0, 0), Formality::Formal);
        assert!((s - (1.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(lex.sentence_score("", Formality::Formal), 0.0);
        assert_eq!(lex.sentence_score("Sie Sie", Formality::Formal), 2.0);
    }

    #[test]
    fn rerank_promotes_requested_register() {
        let lex = fixture();
        let list = NBestList {
            sample_id: "s".into(),
            hypotheses: vec![hyp("du kommst", -1.0, 0), hyp("Sie kommen", -1.2, 1)],
        };
        let formal = rerank_nbest(&lex, &list, Formality::Formal, 1.0).unwrap();
        assert_eq!(formal.best().text, "Sie kommen");
        // du: −1.0 + 0 − (1/3 + 1/3); Sie kommen: −1.2 + 4/3 − 0.
        assert!((formal.hypotheses[0].combined_score - (-1.2 + 4.0 / 3.0)).abs() < 1e-12);
        assert!((formal.hypotheses[1].combined_score - (-1.0 - 2.0 / 3.0)).abs() < 1e-12);

        let informal = rerank_nbest(&lex, &list, Formality::Informal, 1.0).unwrap();
        assert_eq!(informal.best().text, "du kommst");

        let identity =
            rerank_nbest(&FormalityLexicon::empty(), &list, Formality::Formal, 1.0).unwrap();
        assert_eq!(identity.best().text, "du kommst");
        assert_eq!(identity.hypotheses[1].combined_score, -1.2);
    }

    #[test]
    fn nbest_parsing_validates_structure() {
        let lines: Vec<String> = [
            "a ||| 0 ||| -1.0 ||| Sie kommen ||| 30.5",
            "a ||| 1 ||| -1.5 ||| du kommst ||| 29",
            "b ||| 0 ||| -0.5 ||| Hallo",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let lists = parse_nbest(&lines).unwrap();
        assert_eq!(lists.len(), 2);
        assert_eq!(lists[0].hypotheses[1].quality_score, Some(29.0));
        assert_eq!(lists[1].hypotheses[0].text, "Hallo");

        let bad_rank = vec!["a ||| 1 ||| -1 ||| x".to_string()];
        assert!(parse_nbest(&bad_rank).is_err());
        let rising = vec![
            "a ||| 0 ||| -1 ||| x".to_string(),
            "a ||| 1 ||| 0 ||| y".to_string(),
        ];
        assert!(parse_nbest(&rising).is_err());
        let split = vec![
            "a ||| 0 ||| -1 ||| x".to_string(),
            "b ||| 0 ||| -1 ||| x".to_string(),
            "a ||| 0 ||| -1 ||| x".to_string(),
        ];
        assert!(parse_nbest(&split).is_err());
    }

    #[test]
    fn lexicon_tsv_round_trips() {
        let lex = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.tsv");
        lex.save(&path).unwrap();
        assert_eq!(FormalityLexicon::load(&path).unwrap(), lex);
    }

    // Three samples, context F. Correct hypotheses sit at beam ranks 0, 2 and
    // nowhere; rank 0 of sample 1 is Incorrect and all of sample 2 is Skipped.
    #[test]
    fn oracle_walkthrough() {
        let f = |s| parse_annotated(s, Formality::Formal, 1).unwrap();
        let i = |s| parse_annotated(s, Formality::Informal, 1).unwrap();
        let lists = vec![
            NBestList {
                sample_id: "0".into(),
                hypotheses: vec![hyp("Sie", -1.0, 0), hyp("du", -2.0, 1), hyp("du", -3.0, 2)],
            },
            NBestList {
                sample_id: "1".into(),
                hypotheses: vec![
                    hyp("du", -1.0, 0),
                    hyp("dich", -2.0, 1),
                    hyp("Sie", -3.0, 2),
                ],
            },
            NBestList {
                sample_id: "2".into(),
                hypotheses: vec![hyp("x", -1.0, 0), hyp("y", -2.0, 1), hyp("z", -3.0, 2)],
            },
        ];
        let refs_f = vec![f("[F]Sie[/F]"), f("[F]Sie[/F]"), f("[F]Sie[/F]")];
        let refs_i = vec![i("[I]du[/I]"), i("[I]du[/I]"), i("[I]du[/I]")];
        let ctx = vec![Formality::Formal; 3];
        let report = oracle_experiment(&lists, &refs_f, &refs_i, &ctx, &[1, 3], None).unwrap();

        let k1 = &report.rows[0];
        assert_eq!(k1.model, k1.oracle);
        assert_eq!(k1.model.accuracy, Some(0.5));
        assert_eq!((k1.n_cases, k1.delta_to_best), (0, 0.0));

        let k3 = &report.rows[1];
        assert_eq!(k3.oracle.accuracy, Some(1.0));
        assert_eq!(k3.oracle.evaluated, 2);
        assert_eq!(k3.model.accuracy, Some(0.5));
        assert_eq!((k3.n_cases, k3.delta_to_best), (1, 2.0));
    }

    #[test]
    fn oracle_needs_ks() {
        assert!(matches!(
            oracle_experiment(&[], &[], &[], &[], &[], None),
            Err(Error::Argument(_))
        ));
    }
}
