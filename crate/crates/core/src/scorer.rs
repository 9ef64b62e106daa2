//! Phrase-annotation formality accuracy.
//!
//! References carry inline markers, `[F]…[/F]` for formal phrases and
//! `[I]…[/I]` for informal ones. A hypothesis is checked against the reference
//! of the requested register and the reference of the opposite register: each
//! annotated phrase counts once if it occurs in the hypothesis as a contiguous,
//! case-sensitive run of whole tokens. The hypothesis is correct when strictly
//! more desired than opposite phrases match, and skipped when nothing matches.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{tokenize, Formality};
use crate::error::{Error, Result};
use crate::textio::{self, read_lines};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedReference {
    pub plain_text: String,
    pub phrases: Vec<String>,
    pub polarity: Formality,
}

fn collapse_spaces(s: &str) -> String {
    tokenize(s).join(" ")
}

const MARKERS: [(&str, &str); 2] = [("[F]", "[/F]"), ("[I]", "[/I]")];

/// Parses one annotated reference line. `line_no` is reported in errors.
pub fn parse_annotated(
    line: &str,
    polarity: Formality,
    line_no: usize,
) -> Result<AnnotatedReference> {
    let err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let mut plain = String::with_capacity(line.len());
    let mut phrases = Vec::new();
    let mut rest = line;
    let mut open: Option<(usize, &str, String)> = None;

    while !rest.is_empty() {
        let opener = MARKERS
            .iter()
            .find(|(o, _)| rest.starts_with(o))
            .map(|(o, c)| (*o, *c));
        let closer = MARKERS
            .iter()
            .find(|(_, c)| rest.starts_with(c))
            .map(|(_, c)| *c);
        let offset = line.len() - rest.len();
        if let Some((opening, closing)) = opener {
            if let Some((at, tag, _)) = &open {
                return Err(err(format!(
                    "nested `{opening}` at byte {offset} inside `{tag}` opened at byte {at}"
                )));
            }
            open = Some((offset, closing, String::new()));
            rest = &rest[opening.len()..];
        } else if let Some(closing) = closer {
            match open.take() {
                Some((_, expected, phrase)) if expected == closing => {
                    let phrase = collapse_spaces(&phrase);
                    if !phrase.is_empty() {
                        phrases.push(phrase);
                    }
                }
                Some((at, expected, _)) => {
                    return Err(err(format!(
                        "`{closing}` at byte {offset} closes a span opened at byte {at} (expected `{expected}`)"
                    )))
                }
                None => {
                    return Err(err(format!("`{closing}` at byte {offset} has no opening marker")))
                }
            }
            rest = &rest[closing.len()..];
        } else {
            let c = rest.chars().next().expect("rest is non-empty");
            if let Some((_, _, phrase)) = open.as_mut() {
                phrase.push(c);
            }
            plain.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    if let Some((at, tag, _)) = open {
        return Err(err(format!("`{tag}` missing for span opened at byte {at}")));
    }
    Ok(AnnotatedReference {
        plain_text: collapse_spaces(&plain),
        phrases,
        polarity,
    })
}

/// Reads one annotated reference per line.
pub fn load_annotated(path: &Path, polarity: Formality) -> Result<Vec<AnnotatedReference>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_annotated(l, polarity, i + 1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Correct,
    Incorrect,
    Skipped,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Correct => "correct",
            Verdict::Incorrect => "incorrect",
            Verdict::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Judgment {
    pub verdict: Verdict,
    pub n_desired: usize,
    pub n_opposite: usize,
}

/// True if `phrase` occurs in `tokens` as a contiguous run of whole tokens.
pub fn contains_phrase(tokens: &[&str], phrase: &str) -> bool {
    let needle = tokenize(phrase);
    if needle.is_empty() || needle.len() > tokens.len() {
        return false;
    }
    tokens.windows(needle.len()).any(|w| w == needle.as_slice())
}

fn matched_phrases(tokens: &[&str], reference: &AnnotatedReference) -> usize {
    reference
        .phrases
        .iter()
        .filter(|p| contains_phrase(tokens, p))
        .count()
}

pub fn judge_hypothesis(
    hyp: &str,
    desired: &AnnotatedReference,
    opposite: &AnnotatedReference,
) -> Result<Judgment> {
    if desired.polarity == opposite.polarity {
        return Err(Error::Argument(
            "desired and opposite references must have different polarity".into(),
        ));
    }
    let tokens = tokenize(hyp);
    let n_desired = matched_phrases(&tokens, desired);
    let n_opposite = matched_phrases(&tokens, opposite);
    let verdict = if n_desired + n_opposite == 0 {
        Verdict::Skipped
    } else if n_desired > n_opposite {
        Verdict::Correct
    } else {
        Verdict::Incorrect
    };
    Ok(Judgment {
        verdict,
        n_desired,
        n_opposite,
    })
}

/// Judges `hyp` for `context`, picking desired/opposite from the two reference sets.
pub fn judge_in_context(
    hyp: &str,
    formal_ref: &AnnotatedReference,
    informal_ref: &AnnotatedReference,
    context: Formality,
) -> Result<Judgment> {
    match context {
        Formality::Formal => judge_hypothesis(hyp, formal_ref, informal_ref),
        Formality::Informal => judge_hypothesis(hyp, informal_ref, formal_ref),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// `None` when every sample was skipped.
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub incorrect: usize,
    pub skipped: usize,
    pub judgments: Vec<Judgment>,
}

impl ScoreReport {
    pub fn from_judgments(judgments: Vec<Judgment>) -> Self {
        let count = |v: Verdict| judgments.iter().filter(|j| j.verdict == v).count();
        let correct = count(Verdict::Correct);
        let incorrect = count(Verdict::Incorrect);
        let skipped = count(Verdict::Skipped);
        let evaluated = correct + incorrect;
        ScoreReport {
            accuracy: (evaluated > 0).then(|| correct as f64 / evaluated as f64),
            correct,
            incorrect,
            skipped,
            judgments,
        }
    }

    pub fn evaluated(&self) -> usize {
        self.correct + self.incorrect
    }

    /// Structured `key=value` summary.
    pub fn render(&self) -> String {
        let mut out = String::new();
        match self.accuracy {
            Some(a) => {
                let _ = writeln!(out, "accuracy={}", textio::fmt_f64(a));
            }
            None => out.push_str("accuracy=undefined\n"),
        }
        let _ = writeln!(out, "evaluated={}", self.evaluated());
        let _ = writeln!(out, "correct={}", self.correct);
        let _ = writeln!(out, "incorrect={}", self.incorrect);
        let _ = writeln!(out, "skipped={}", self.skipped);
        let _ = writeln!(out, "samples={}", self.judgments.len());
        out
    }

    /// Per-sample TSV: `sample, verdict, n_desired, n_opposite`.
    pub fn judgments_tsv(&self) -> String {
        let mut out = String::from("sample\tverdict\tn_desired\tn_opposite\n");
        for (i, j) in self.judgments.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i}\t{}\t{}\t{}",
                j.verdict.name(),
                j.n_desired,
                j.n_opposite
            );
        }
        out
    }
}

pub fn corpus_accuracy<S: AsRef<str> + Sync>(
    hyps: &[S],
    formal_refs: &[AnnotatedReference],
    informal_refs: &[AnnotatedReference],
    contexts: &[Formality],
) -> Result<ScoreReport> {
    let n = hyps.len();
    for (what, len) in [
        ("hypotheses vs formal references", formal_refs.len()),
        ("hypotheses vs informal references", informal_refs.len()),
        ("hypotheses vs contexts", contexts.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                left: n,
                right: len,
            });
        }
    }
    let judgments = hyps
        .par_iter()
        .enumerate()
        .map(|(i, h)| judge_in_context(h.as_ref(), &formal_refs[i], &informal_refs[i], contexts[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreReport::from_judgments(judgments))
}

/// Context argument: `F`, `I`, or a path to a file with one `F`/`I` per line.
pub fn load_contexts(arg: &str, n: usize) -> Result<Vec<Formality>> {
    if let Some(c) = Formality::parse(arg) {
        return Ok(vec![c; n]);
    }
    let lines = read_lines(Path::new(arg))?;
    let contexts = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Formality::parse(l).ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("context must be F or I, got `{l}`"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if contexts.len() != n {
        return Err(Error::LengthMismatch {
            what: "contexts vs samples",
            left: contexts.len(),
            right: n,
        });
    }
    Ok(contexts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn formal(line: &str) -> AnnotatedReference {
        parse_annotated(line, Formality::Formal, 1).unwrap()
    }

    fn informal(line: &str) -> AnnotatedReference {
        parse_annotated(line, Formality::Informal, 1).unwrap()
    }

    #[test]
    fn parses_single_marker() {
        let r = formal("Wie geht es [F]Ihnen[/F] ?");
        assert_eq!(r.phrases, vec!["Ihnen"]);
        assert_eq!(r.plain_text, "Wie geht es Ihnen ?");
    }

    #[test]
    fn unmarked_line_is_unchanged() {
        let r = formal("Wie geht es ?");
        assert!(r.phrases.is_empty());
        assert_eq!(r.plain_text, "Wie geht es ?");
    }

    #[test]
    fn parses_multiple_spans() {
        let r = formal("[F]a[/F] b [F]c d[/F]");
        assert_eq!(r.phrases, vec!["a", "c d"]);
        assert_eq!(r.plain_text, "a b c d");
        for p in &r.phrases {
            assert!(r.plain_text.contains(p.as_str()));
        }
    }

    #[test]
    fn rejects_bad_markup() {
        for line in [
            "[F]a",
            "a[/F]",
            "[F][F]a[/F][/F]",
            "[F]a[/I]",
            "[F]a [I]b[/I][/F]",
        ] {
            match parse_annotated(line, Formality::Formal, 7) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
                other => panic!("{line}: {other:?}"),
            }
        }
    }

    #[test]
    fn judgments_follow_strict_majority() {
        let desired = formal("Wie geht es [F]Ihnen[/F] ?");
        let opposite = informal("Wie geht es [I]dir[/I] ?");
        let j = judge_hypothesis("Wie geht es Ihnen ?", &desired, &opposite).unwrap();
        assert_eq!(
            (j.verdict, j.n_desired, j.n_opposite),
            (Verdict::Correct, 1, 0)
        );

        let j = judge_hypothesis("Hallo Welt", &desired, &opposite).unwrap();
        assert_eq!(j.verdict, Verdict::Skipped);

        let j = judge_hypothesis("Ihnen und dir", &desired, &opposite).unwrap();
        assert_eq!(
            (j.verdict, j.n_desired, j.n_opposite),
            (Verdict::Incorrect, 1, 1)
        );
    }

    #[test]
    fn matching_respects_token_boundaries_and_case() {
        let tokens = tokenize("Das Siegel ist da");
        assert!(!contains_phrase(&tokens, "Sie"));
        assert!(!contains_phrase(&tokenize("sie kommen"), "Sie"));
        assert!(contains_phrase(&tokenize("ob Sie kommen"), "Sie kommen"));
        // Breaking the run of a multi-token phrase removes the match.
        assert!(!contains_phrase(&tokenize("kommen ob Sie"), "Sie kommen"));
    }

    #[test]
    fn same_polarity_is_rejected() {
        let a = formal("[F]x[/F]");
        assert!(judge_hypothesis("x", &a, &a).is_err());
    }

    #[test]
    fn aggregate_skips_unmatched_samples() {
        let f = formal("[F]Sie[/F]");
        let i = informal("[I]du[/I]");
        let hyps = ["Sie", "du", "nichts"];
        let refs_f = vec![f.clone(), f.clone(), f];
        let refs_i = vec![i.clone(), i.clone(), i];
        let ctx = vec![Formality::Formal; 3];
        let report = corpus_accuracy(&hyps, &refs_f, &refs_i, &ctx).unwrap();
        assert_eq!(report.accuracy, Some(0.5));
        assert_eq!(report.skipped, 1);
        assert_eq!(report.evaluated(), 2);

        let all_skipped = corpus_accuracy(&["x"], &refs_f[..1], &refs_i[..1], &ctx[..1]).unwrap();
        assert_eq!(all_skipped.accuracy, None);
        assert!(all_skipped.render().contains("accuracy=undefined"));

        let all_correct =
            corpus_accuracy(&["Sie", "Sie"], &refs_f[..2], &refs_i[..2], &ctx[..2]).unwrap();
        assert_eq!(all_correct.accuracy, Some(1.0));
    }

    #[test]
    fn misaligned_inputs_are_rejected() {
        let f = formal("[F]Sie[/F]");
        let i = informal("[I]du[/I]");
        let err = corpus_accuracy(&["a", "b"], &[f], &[i], &[Formality::Formal]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn skipped_samples_never_move_accuracy(
            rows in prop::collection::vec(("(Sie|du|es|geht)( (Sie|du|es|geht)){0,3}", any::<bool>()), 1..12),
        ) {
            let f = parse_annotated("[F]Sie[/F] geht", Formality::Formal, 1).unwrap();
            let i = parse_annotated("[I]du[/I] geht", Formality::Informal, 1).unwrap();
            let ctx = |b: bool| if b { Formality::Formal } else { Formality::Informal };
            let hyps: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
            let contexts: Vec<Formality> = rows.iter().map(|r| ctx(r.1)).collect();
            let n = rows.len();
            let base = corpus_accuracy(&hyps, &vec![f.clone(); n], &vec![i.clone(); n], &contexts).unwrap();
            let mut more_hyps = hyps.clone();
            more_hyps.push("es geht");
            let mut more_ctx = contexts.clone();
            more_ctx.push(Formality::Formal);
            let more = corpus_accuracy(&more_hyps, &vec![f; n + 1], &vec![i; n + 1], &more_ctx).unwrap();
            prop_assert_eq!(more.accuracy, base.accuracy);
            prop_assert_eq!(more.skipped, base.skipped + 1);
        }
    }
}
