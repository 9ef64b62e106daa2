//! Parallel corpora, formality labels, tokenization and restricted vocabularies.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textio::{self, escape_field, read_lines, unescape_field, write_lines};

/// Reserved symbol for out-of-vocabulary tokens.
pub const UNK: &str = "⟨unk⟩";

/// Prefixed to literal occurrences of [`UNK`] in loaded data (U+2060 WORD JOINER).
pub const UNK_ESCAPE: char = '\u{2060}';

#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub source: String,
    pub target: String,
    pub index: usize,
    pub aux_score: Option<f64>,
}

impl SentencePair {
    pub fn new(index: usize, source: impl Into<String>, target: impl Into<String>) -> Self {
        SentencePair {
            source: source.into(),
            target: target.into(),
            index,
            aux_score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
    pub source_lang: String,
    pub target_lang: String,
}

impl ParallelCorpus {
    /// Builds a corpus from aligned sentence lists, numbering pairs from 0.
    pub fn from_sentences<S, T>(sources: S, targets: T) -> Result<Self>
    where
        S: IntoIterator,
        S::Item: Into<String>,
        T: IntoIterator,
        T::Item: Into<String>,
    {
        let sources: Vec<String> = sources.into_iter().map(Into::into).collect();
        let targets: Vec<String> = targets.into_iter().map(Into::into).collect();
        if sources.len() != targets.len() {
            return Err(Error::Alignment {
                source_lines: sources.len(),
                target_lines: targets.len(),
            });
        }
        let pairs = sources
            .into_iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (s, t))| SentencePair::new(i, s, t))
            .collect();
        Ok(ParallelCorpus {
            pairs,
            source_lang: "src".into(),
            target_lang: "tgt".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.source.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.target.as_str())
    }

    /// Attaches one auxiliary score per pair, in order.
    pub fn with_aux_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.pairs.len() {
            return Err(Error::LengthMismatch {
                what: "aux scores vs corpus pairs",
                left: scores.len(),
                right: self.pairs.len(),
            });
        }
        for (pair, score) in self.pairs.iter_mut().zip(scores) {
            pair.aux_score = Some(score);
        }
        Ok(self)
    }

    /// Renumbers pairs 0..n−1 in their current order.
    pub fn reindexed(mut self) -> Self {
        for (i, pair) in self.pairs.iter_mut().enumerate() {
            pair.index = i;
        }
        self
    }
}

/// Language code from a `<name>.<lang>` path, falling back to `fallback`.
fn lang_from_path(path: &Path, fallback: &str) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .filter(|e| !e.is_empty())
        .unwrap_or(fallback)
        .to_owned()
}

pub fn escape_unk(line: &str) -> String {
    if line.contains(UNK) {
        line.replace(UNK, &format!("{UNK_ESCAPE}{UNK}"))
    } else {
        line.to_owned()
    }
}

pub fn unescape_unk(line: &str) -> String {
    let escaped = format!("{UNK_ESCAPE}{UNK}");
    if line.contains(&escaped) {
        line.replace(&escaped, UNK)
    } else {
        line.to_owned()
    }
}

/// Reads a text file as one sentence per line with the reserved unk symbol escaped.
pub fn load_sentences(path: &Path) -> Result<Vec<String>> {
    Ok(read_lines(path)?.iter().map(|l| escape_unk(l)).collect())
}

pub fn load_parallel(src_path: &Path, tgt_path: &Path) -> Result<ParallelCorpus> {
    let sources = load_sentences(src_path)?;
    let targets = load_sentences(tgt_path)?;
    let mut corpus = ParallelCorpus::from_sentences(sources, targets)?;
    corpus.source_lang = lang_from_path(src_path, "src");
    corpus.target_lang = lang_from_path(tgt_path, "tgt");
    Ok(corpus)
}

/// Reads an aux-score file (one real per line) aligned with a corpus.
pub fn load_aux_scores(path: &Path) -> Result<Vec<f64>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| textio::parse_f64(l, i + 1, "aux score"))
        .collect()
}

pub fn save_parallel(corpus: &ParallelCorpus, src_path: &Path, tgt_path: &Path) -> Result<()> {
    write_lines(
        src_path,
        corpus.pairs.iter().map(|p| unescape_unk(&p.source)),
    )?;
    write_lines(
        tgt_path,
        corpus.pairs.iter().map(|p| unescape_unk(&p.target)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormalityLabel {
    Formal,
    Informal,
    None,
}

impl FormalityLabel {
    pub fn code(self) -> &'static str {
        match self {
            FormalityLabel::Formal => "F",
            FormalityLabel::Informal => "I",
            FormalityLabel::None => "N",
        }
    }

    pub fn parse(code: &str) -> Option<Self> {
        match code.trim() {
            "F" => Some(FormalityLabel::Formal),
            "I" => Some(FormalityLabel::Informal),
            "N" | "" | "∅" => Some(FormalityLabel::None),
            _ => None,
        }
    }

    pub fn is_labeled(self) -> bool {
        self != FormalityLabel::None
    }
}

impl fmt::Display for FormalityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// The two registers a caller can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formality {
    Formal,
    Informal,
}

impl Formality {
    pub fn opposite(self) -> Self {
        match self {
            Formality::Formal => Formality::Informal,
            Formality::Informal => Formality::Formal,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Formality::Formal => "F",
            Formality::Informal => "I",
        }
    }

    pub fn parse(code: &str) -> Option<Self> {
        match code.trim() {
            "F" | "f" | "formal" => Some(Formality::Formal),
            "I" | "i" | "informal" => Some(Formality::Informal),
            _ => None,
        }
    }
}

impl From<Formality> for FormalityLabel {
    fn from(f: Formality) -> Self {
        match f {
            Formality::Formal => FormalityLabel::Formal,
            Formality::Informal => FormalityLabel::Informal,
        }
    }
}

impl fmt::Display for Formality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCorpus {
    pub pairs: Vec<(SentencePair, FormalityLabel)>,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn with_label(&self, label: FormalityLabel) -> impl Iterator<Item = &SentencePair> {
        self.pairs
            .iter()
            .filter(move |(_, l)| *l == label)
            .map(|(p, _)| p)
    }

    pub fn count(&self, label: FormalityLabel) -> usize {
        self.pairs.iter().filter(|(_, l)| *l == label).count()
    }

    pub fn labeled_count(&self) -> usize {
        self.pairs.iter().filter(|(_, l)| l.is_labeled()).count()
    }

    /// Writes `index, label, source, target` rows. `None` rows are written as `N`
    /// only when `include_none` is set.
    pub fn write_tsv(&self, path: &Path, include_none: bool) -> Result<()> {
        textio::write_string(path, &self.to_tsv(include_none))
    }

    pub fn to_tsv(&self, include_none: bool) -> String {
        let mut out = String::new();
        for (pair, label) in &self.pairs {
            if !include_none && !label.is_labeled() {
                continue;
            }
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                pair.index,
                label.code(),
                escape_field(&unescape_unk(&pair.source)),
                escape_field(&unescape_unk(&pair.target)),
            ));
        }
        out
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashMap::new();
        for (i, line) in read_lines(path)?.iter().enumerate() {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let index = textio::parse_usize(fields[0], line_no, "index")?;
            let label = FormalityLabel::parse(fields[1]).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("unknown label `{}`", fields[1]),
            })?;
            if let Some(prev) = seen.insert(index, line_no) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("index {index} already used on line {prev}"),
                });
            }
            let source = escape_unk(&unescape_field(fields[2]));
            let target = escape_unk(&unescape_field(fields[3]));
            pairs.push((SentencePair::new(index, source, target), label));
        }
        Ok(LabeledCorpus { pairs })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Vocabulary {
            tokens: tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| t != UNK)
                .collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn unk_token(&self) -> &'static str {
        UNK
    }

    /// Hex SHA-256 over the sorted token list, newline-joined.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for token in &self.tokens {
            hasher.update(token.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Splits on runs of whitespace. Case and punctuation are left alone.
pub fn tokenize(sentence: &str) -> Vec<&str> {
    sentence.split_whitespace().collect()
}

pub fn extract_vocabulary<I, S>(sentences: I, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if min_count == 0 {
        return Err(Error::Argument("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for sentence in sentences {
        for token in tokenize(sentence.as_ref()) {
            *counts.entry(token.to_owned()).or_default() += 1;
        }
    }
    Ok(Vocabulary::new(
        counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .map(|(t, _)| t),
    ))
}
