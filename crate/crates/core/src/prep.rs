//! Cleaning cascade for raw web bitext.
//!
//! Order: punctuation normalization, per-pair rule filters, deduplication,
//! confidence thresholding. Survivors keep their input order and original index.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{tokenize, ParallelCorpus, SentencePair};
use crate::error::{Error, Result};
use crate::textio::{self, fmt_f64, read_lines};

/// Version of the punctuation rule table below.
pub const PUNCT_TABLE_VERSION: u32 = 1;

/// Character replacements applied by [`normalize_punctuation`].
pub const PUNCT_TABLE: &[(char, &str)] = &[
    ('\u{201C}', "\""), // “
    ('\u{201D}', "\""), // ”
    ('\u{201E}', "\""), // „
    ('\u{201F}', "\""), // ‟
    ('\u{00AB}', "\""), // «
    ('\u{00BB}', "\""), // »
    ('\u{2033}', "\""), // ″
    ('\u{2018}', "'"),  // ‘
    ('\u{2019}', "'"),  // ’
    ('\u{201A}', "'"),  // ‚
    ('\u{201B}', "'"),  // ‛
    ('\u{2032}', "'"),  // ′
    ('\u{2010}', "-"),  // hyphen
    ('\u{2011}', "-"),  // non-breaking hyphen
    ('\u{2012}', "-"),  // figure dash
    ('\u{2013}', "-"),  // en dash
    ('\u{2014}', "-"),  // em dash
    ('\u{2015}', "-"),  // horizontal bar
    ('\u{2212}', "-"),  // minus sign
    ('\u{2026}', "..."),
    ('\u{00A0}', " "),
    ('\u{2007}', " "),
    ('\u{2009}', " "),
    ('\u{200A}', " "),
    ('\u{202F}', " "),
    ('\u{3000}', " "),
];

/// Applies [`PUNCT_TABLE`] and collapses runs of ASCII spaces. Idempotent.
pub fn normalize_punctuation(sentence: &str) -> String {
    let mut out = String::with_capacity(sentence.len());
    for c in sentence.chars() {
        let replacement = PUNCT_TABLE
            .iter()
            .find(|(from, _)| *from == c)
            .map(|(_, to)| *to);
        let piece = match replacement {
            Some(to) => to,
            None => {
                if c == ' ' && out.ends_with(' ') {
                    continue;
                }
                out.push(c);
                continue;
            }
        };
        for r in piece.chars() {
            if r == ' ' && out.ends_with(' ') {
                continue;
            }
            out.push(r);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    Length,
    Ratio,
    Empty,
    Identical,
    Case,
    Punctuation,
    NonAscii,
    Duplicate,
    NearDuplicate,
    LowConfidence,
}

impl DropReason {
    pub const ALL: [DropReason; 10] = [
        DropReason::Length,
        DropReason::Ratio,
        DropReason::Empty,
        DropReason::Identical,
        DropReason::Case,
        DropReason::Punctuation,
        DropReason::NonAscii,
        DropReason::Duplicate,
        DropReason::NearDuplicate,
        DropReason::LowConfidence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DropReason::Length => "length",
            DropReason::Ratio => "ratio",
            DropReason::Empty => "empty",
            DropReason::Identical => "identical",
            DropReason::Case => "case",
            DropReason::Punctuation => "punctuation",
            DropReason::NonAscii => "non_ascii",
            DropReason::Duplicate => "duplicate",
            DropReason::NearDuplicate => "near_duplicate",
            DropReason::LowConfidence => "low_confidence",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsciiMode {
    /// Remove non-ASCII characters from the source and keep the pair.
    Strip,
    /// Drop pairs whose source has non-ASCII characters.
    Drop,
}

impl AsciiMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "strip" => Some(AsciiMode::Strip),
            "drop" => Some(AsciiMode::Drop),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AsciiMode::Strip => "strip",
            AsciiMode::Drop => "drop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleFlags {
    pub normalize: bool,
    pub length: bool,
    pub ratio: bool,
    pub empty: bool,
    pub identical: bool,
    pub case: bool,
    pub punctuation: bool,
    pub ascii: bool,
    pub dedup: bool,
    pub confidence: bool,
}

impl Default for RuleFlags {
    fn default() -> Self {
        RuleFlags {
            normalize: true,
            length: true,
            ratio: true,
            empty: true,
            identical: true,
            case: true,
            punctuation: true,
            ascii: true,
            dedup: true,
            confidence: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub max_tokens: usize,
    pub max_ratio: f64,
    pub confidence_threshold: f64,
    pub ascii_mode: AsciiMode,
    pub rules: RuleFlags,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_tokens: 250,
            max_ratio: 1.5,
            confidence_threshold: 0.7,
            ascii_mode: AsciiMode::Strip,
            rules: RuleFlags::default(),
        }
    }
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool> {
    match value.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(Error::Parse {
            line,
            message: format!("{key}: expected on/off, got `{other}`"),
        }),
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < 1 {
            return Err(Error::Argument("max_tokens must be at least 1".into()));
        }
        if !(self.max_ratio > 0.0) {
            return Err(Error::Argument("max_ratio must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Argument(
                "confidence_threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = FilterConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: ln,
                message: format!("expected key=value, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let r = &mut cfg.rules;
            match key {
                "max_tokens" => cfg.max_tokens = textio::parse_usize(value, ln, key)?,
                "max_ratio" => cfg.max_ratio = textio::parse_f64(value, ln, key)?,
                "confidence_threshold" => {
                    cfg.confidence_threshold = textio::parse_f64(value, ln, key)?
                }
                "ascii" => {
                    cfg.ascii_mode = AsciiMode::parse(value).ok_or_else(|| Error::Parse {
                        line: ln,
                        message: format!("ascii: expected drop or strip, got `{value}`"),
                    })?
                }
                "rule.normalize" => r.normalize = parse_bool(value, ln, key)?,
                "rule.length" => r.length = parse_bool(value, ln, key)?,
                "rule.ratio" => r.ratio = parse_bool(value, ln, key)?,
                "rule.empty" => r.empty = parse_bool(value, ln, key)?,
                "rule.identical" => r.identical = parse_bool(value, ln, key)?,
                "rule.case" => r.case = parse_bool(value, ln, key)?,
                "rule.punctuation" => r.punctuation = parse_bool(value, ln, key)?,
                "rule.ascii" => r.ascii = parse_bool(value, ln, key)?,
                "rule.dedup" => r.dedup = parse_bool(value, ln, key)?,
                "rule.confidence" => r.confidence = parse_bool(value, ln, key)?,
                other => {
                    return Err(Error::Parse {
                        line: ln,
                        message: format!("unknown config key `{other}`"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let r = &self.rules;
        let on = |b: bool| if b { "on" } else { "off" };
        let mut out = String::new();
        let _ = writeln!(out, "max_tokens={}", self.max_tokens);
        let _ = writeln!(out, "max_ratio={}", fmt_f64(self.max_ratio));
        let _ = writeln!(
            out,
            "confidence_threshold={}",
            fmt_f64(self.confidence_threshold)
        );
        let _ = writeln!(out, "ascii={}", self.ascii_mode.name());
        for (name, flag) in [
            ("normalize", r.normalize),
            ("length", r.length),
            ("ratio", r.ratio),
            ("empty", r.empty),
            ("identical", r.identical),
            ("case", r.case),
            ("punctuation", r.punctuation),
            ("ascii", r.ascii),
            ("dedup", r.dedup),
            ("confidence", r.confidence),
        ] {
            let _ = writeln!(out, "rule.{name}={}", on(flag));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CleanOutcome {
    Keep(SentencePair),
    Drop(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CaseClass {
    Upper,
    Lower,
    Uncased,
}

fn first_case(s: &str) -> CaseClass {
    match s.trim_start().chars().next() {
        Some(c) if c.is_uppercase() => CaseClass::Upper,
        Some(c) if c.is_lowercase() => CaseClass::Lower,
        _ => CaseClass::Uncased,
    }
}

pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || "¿¡«»‹›“”„‘’‚…–—·。、！？：；".contains(c)
}

fn terminal_punctuation(s: &str) -> Option<char> {
    s.trim_end().chars().last().filter(|c| is_punctuation(*c))
}

/// Applies the per-pair rules in fixed order; the first failing rule is the reason.
pub fn clean_pair(pair: &SentencePair, cfg: &FilterConfig) -> CleanOutcome {
    let rules = &cfg.rules;
    let src_len = tokenize(&pair.source).len();
    let tgt_len = tokenize(&pair.target).len();
    if rules.length && (src_len > cfg.max_tokens || tgt_len > cfg.max_tokens) {
        return CleanOutcome::Drop(DropReason::Length);
    }
    if rules.ratio && src_len > 0 && tgt_len > 0 {
        let ratio = src_len.max(tgt_len) as f64 / src_len.min(tgt_len) as f64;
        if ratio > cfg.max_ratio {
            return CleanOutcome::Drop(DropReason::Ratio);
        }
    }
    if rules.empty && (src_len == 0 || tgt_len == 0) {
        return CleanOutcome::Drop(DropReason::Empty);
    }
    if rules.identical && pair.source.trim() == pair.target.trim() {
        return CleanOutcome::Drop(DropReason::Identical);
    }
    if rules.case {
        let (s, t) = (first_case(&pair.source), first_case(&pair.target));
        if s != CaseClass::Uncased && t != CaseClass::Uncased && s != t {
            return CleanOutcome::Drop(DropReason::Case);
        }
    }
    if rules.punctuation {
        let (s, t) = (
            terminal_punctuation(&pair.source),
            terminal_punctuation(&pair.target),
        );
        if (s.is_some() || t.is_some()) && s != t {
            return CleanOutcome::Drop(DropReason::Punctuation);
        }
    }
    if rules.ascii && !pair.source.is_ascii() {
        match cfg.ascii_mode {
            AsciiMode::Drop => return CleanOutcome::Drop(DropReason::NonAscii),
            AsciiMode::Strip => {
                let stripped: String = pair.source.chars().filter(char::is_ascii).collect();
                let stripped = tokenize(&stripped).join(" ");
                if stripped.is_empty() {
                    return CleanOutcome::Drop(DropReason::NonAscii);
                }
                let mut kept = pair.clone();
                kept.source = stripped;
                return CleanOutcome::Keep(kept);
            }
        }
    }
    CleanOutcome::Keep(pair.clone())
}

fn near_dup_key(s: &str) -> String {
    let lowered = tokenize(s).join(" ").to_lowercase();
    lowered
        .trim_end_matches(|c: char| is_punctuation(c) || c.is_whitespace())
        .to_owned()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DedupCounts {
    pub exact: usize,
    pub near: usize,
}

/// Drops exact duplicate pairs, then pairs equal after lowercasing and stripping
/// terminal punctuation on both sides. First occurrence wins.
pub fn dedup(corpus: &ParallelCorpus) -> (ParallelCorpus, DedupCounts) {
    let mut exact = HashSet::new();
    let mut near = HashSet::new();
    let mut counts = DedupCounts::default();
    let mut pairs = Vec::with_capacity(corpus.len());
    for pair in &corpus.pairs {
        if !exact.insert((pair.source.as_str(), pair.target.as_str())) {
            counts.exact += 1;
            continue;
        }
        if !near.insert((near_dup_key(&pair.source), near_dup_key(&pair.target))) {
            counts.near += 1;
            continue;
        }
        pairs.push(pair.clone());
    }
    (
        ParallelCorpus {
            pairs,
            source_lang: corpus.source_lang.clone(),
            target_lang: corpus.target_lang.clone(),
        },
        counts,
    )
}

/// Keeps pairs whose aux score is at least `threshold`.
pub fn confidence_filter(corpus: &ParallelCorpus, threshold: f64) -> Result<ParallelCorpus> {
    let mut pairs = Vec::with_capacity(corpus.len());
    for pair in &corpus.pairs {
        let score = pair
            .aux_score
            .ok_or_else(|| Error::Data(format!("pair {} has no confidence score", pair.index)))?;
        if score >= threshold {
            pairs.push(pair.clone());
        }
    }
    Ok(ParallelCorpus {
        pairs,
        source_lang: corpus.source_lang.clone(),
        target_lang: corpus.target_lang.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterStats {
    pub input: usize,
    pub output: usize,
    pub drops: BTreeMap<DropReason, usize>,
}

impl FilterStats {
    pub fn dropped(&self) -> usize {
        self.drops.values().sum()
    }

    pub fn reconciles(&self) -> bool {
        self.input == self.output + self.dropped()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "input={}", self.input);
        let _ = writeln!(out, "output={}", self.output);
        for reason in DropReason::ALL {
            let n = self.drops.get(&reason).copied().unwrap_or(0);
            let _ = writeln!(out, "dropped.{}={n}", reason.name());
        }
        let _ = writeln!(out, "punct_table_version={PUNCT_TABLE_VERSION}");
        out
    }
}

/// Runs the whole cascade. Confidence filtering applies when enabled and the
/// corpus carries aux scores.
pub fn clean_corpus(
    corpus: &ParallelCorpus,
    cfg: &FilterConfig,
) -> Result<(ParallelCorpus, FilterStats)> {
    cfg.validate()?;
    let mut stats = FilterStats {
        input: corpus.len(),
        ..Default::default()
    };
    let outcomes: Vec<CleanOutcome> = corpus
        .pairs
        .par_iter()
        .map(|pair| {
            if cfg.rules.normalize {
                let mut normalized = pair.clone();
                normalized.source = normalize_punctuation(&pair.source);
                normalized.target = normalize_punctuation(&pair.target);
                clean_pair(&normalized, cfg)
            } else {
                clean_pair(pair, cfg)
            }
        })
        .collect();
    let mut kept = Vec::with_capacity(corpus.len());
    for outcome in outcomes {
        match outcome {
            CleanOutcome::Keep(p) => kept.push(p),
            CleanOutcome::Drop(reason) => *stats.drops.entry(reason).or_default() += 1,
        }
    }
    let mut current = ParallelCorpus {
        pairs: kept,
        source_lang: corpus.source_lang.clone(),
        target_lang: corpus.target_lang.clone(),
    };
    if cfg.rules.dedup {
        let (deduped, counts) = dedup(&current);
        *stats.drops.entry(DropReason::Duplicate).or_default() += counts.exact;
        *stats.drops.entry(DropReason::NearDuplicate).or_default() += counts.near;
        current = deduped;
    }
    let has_scores = corpus.pairs.iter().any(|p| p.aux_score.is_some());
    if cfg.rules.confidence && has_scores {
        let before = current.len();
        current = confidence_filter(&current, cfg.confidence_threshold)?;
        *stats.drops.entry(DropReason::LowConfidence).or_default() += before - current.len();
    }
    stats.output = current.len();
    stats.drops.retain(|_, n| *n > 0);
    Ok((current, stats))
}

/// Reads `source<TAB>target[<TAB>score]` lines (the streaming form of a corpus).
pub fn parse_tsv_pairs(lines: &[String]) -> Result<ParallelCorpus> {
    let mut pairs = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let mut pair = match fields.as_slice() {
            [s, t] | [s, t, _] => {
                SentencePair::new(i, textio::unescape_field(s), textio::unescape_field(t))
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `source<TAB>target[<TAB>score]`".into(),
                })
            }
        };
        if let [_, _, score] = fields.as_slice() {
            pair.aux_score = Some(textio::parse_f64(score, i + 1, "score")?);
        }
        pairs.push(pair);
    }
    Ok(ParallelCorpus {
        pairs,
        source_lang: "src".into(),
        target_lang: "tgt".into(),
    })
}

pub fn tsv_pairs(corpus: &ParallelCorpus) -> String {
    let mut out = String::new();
    for p in &corpus.pairs {
        let _ = write!(
            out,
            "{}\t{}",
            textio::escape_field(&p.source),
            textio::escape_field(&p.target)
        );
        if let Some(s) = p.aux_score {
            let _ = write!(out, "\t{}", fmt_f64(s));
        }
        out.push('\n');
    }
    out
}

pub fn load_tsv_pairs(path: &Path) -> Result<ParallelCorpus> {
    parse_tsv_pairs(&read_lines(path)?)
}
