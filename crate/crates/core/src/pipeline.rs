//! End-to-end orchestration of the supervised and zero-shot mining flows, plus
//! checkpoint window selection over an accuracy series.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{self, Formality, FormalityLabel, LabeledCorpus, ParallelCorpus};
use crate::error::{Error, Result};
use crate::lm::{self, LmConfig, PerplexityScore, SelectionLmConfig};
use crate::pivot;
use crate::prep::{self, DropReason, FilterConfig, FilterStats};
use crate::rerank::{self, FormalityLexicon, RerankSettings};
use crate::scorer::{self, Verdict};
use crate::select::{self, CalibrationConfig, RankedCorpus, SelectionMode, SelectionReport};
use crate::textio::{self, fmt_f64, read_lines, write_string};

/// Ordered `(checkpoint_id, accuracy)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    points: Vec<(String, f64)>,
}

impl ScoreSeries {
    pub fn new(points: Vec<(String, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("score series is empty".into()));
        }
        let mut seen = HashSet::new();
        for (id, acc) in &points {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate checkpoint id `{id}`")));
            }
            if !(0.0..=1.0).contains(acc) {
                return Err(Error::Data(format!(
                    "accuracy {acc} of `{id}` is outside [0, 1]"
                )));
            }
        }
        Ok(ScoreSeries { points })
    }

    /// One `accuracy` or `id<TAB>accuracy` per line; bare values get their
    /// 0-based line number as id.
    pub fn parse(lines: &[String]) -> Result<Self> {
        let mut points = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, value) = match line.split_once('\t') {
                Some((id, value)) => (id.to_owned(), value),
                None => (i.to_string(), line.as_str()),
            };
            points.push((id, textio::parse_f64(value.trim(), i + 1, "accuracy")?));
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_lines(path)?)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.points.iter().map(|(id, _)| id.as_str())
    }

    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, a)| a).collect()
    }

    pub fn best_window(&self, window: usize) -> Result<WindowChoice> {
        best_window(&self.scores(), window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowChoice {
    pub start: usize,
    pub mean: f64,
}

/// Start of the contiguous window with the highest mean; ties go to the
/// smallest start. Each window is summed on its own so that equal windows
/// compare equal regardless of position.
pub fn best_window(scores: &[f64], window: usize) -> Result<WindowChoice> {
    if window == 0 {
        return Err(Error::Argument("window must be at least 1".into()));
    }
    if window > scores.len() {
        return Err(Error::Argument(format!(
            "window {window} exceeds series length {}",
            scores.len()
        )));
    }
    let mut best = WindowChoice {
        start: 0,
        mean: f64::NEG_INFINITY,
    };
    for start in 0..=scores.len() - window {
        let mean = scores[start..start + window].iter().sum::<f64>() / window as f64;
        if mean > best.mean {
            best = WindowChoice { start, mean };
        }
    }
    Ok(best)
}

fn default_seed() -> u64 {
    13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSection {
    pub order: usize,
    pub k: f64,
    pub min_count: usize,
    pub general_sample: usize,
}

impl Default for LmSection {
    fn default() -> Self {
        let d = SelectionLmConfig::default();
        LmSection {
            order: d.lm.order,
            k: d.lm.k,
            min_count: d.min_count,
            general_sample: d.general_sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepSection {
    pub enabled: bool,
    pub max_tokens: usize,
    pub max_ratio: f64,
    pub confidence_threshold: f64,
    pub ascii: String,
    /// Rule names to switch off, as in the key=value prep config.
    pub disable: Vec<String>,
}

impl Default for PrepSection {
    fn default() -> Self {
        let d = FilterConfig::default();
        PrepSection {
            enabled: true,
            max_tokens: d.max_tokens,
            max_ratio: d.max_ratio,
            confidence_threshold: d.confidence_threshold,
            ascii: d.ascii_mode.name().into(),
            disable: Vec::new(),
        }
    }
}

impl PrepSection {
    pub fn filter_config(&self) -> Result<FilterConfig> {
        let mut text = format!(
            "max_tokens={}\nmax_ratio={}\nconfidence_threshold={}\nascii={}\n",
            self.max_tokens,
            fmt_f64(self.max_ratio),
            fmt_f64(self.confidence_threshold),
            self.ascii
        );
        for rule in &self.disable {
            let _ = writeln!(text, "rule.{rule}=off");
        }
        FilterConfig::parse(&text).map_err(|e| Error::Argument(format!("[prep] section: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningSection {
    /// `full` (α rule) or `easy` (θ rule).
    pub mode: String,
    /// Fixed α; calibrated when absent.
    pub alpha: Option<usize>,
    /// Fixed θ as a fraction of the corpus size; grid-searched when absent.
    pub theta: Option<f64>,
    pub calibration_lower: f64,
    pub calibration_upper: f64,
    pub calibration_steps: usize,
}

impl Default for MiningSection {
    fn default() -> Self {
        let d = CalibrationConfig::default();
        MiningSection {
            mode: "full".into(),
            alpha: None,
            theta: None,
            calibration_lower: d.lower,
            calibration_upper: d.upper,
            calibration_steps: d.steps,
        }
    }
}

impl MiningSection {
    pub fn selection_mode(&self) -> Result<SelectionMode> {
        match self.mode.as_str() {
            "full" => Ok(SelectionMode::Full),
            "easy" => Ok(SelectionMode::Easy),
            other => Err(Error::Argument(format!(
                "[mining] mode must be `full` or `easy`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LexiconSection {
    pub kappa_threshold: f64,
}

impl Default for LexiconSection {
    fn default() -> Self {
        LexiconSection {
            kappa_threshold: rerank::DEFAULT_KAPPA_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RerankSection {
    pub lambda: f64,
    pub ks: Vec<usize>,
}

impl Default for RerankSection {
    fn default() -> Self {
        RerankSection {
            lambda: 1.0,
            ks: vec![1, 2, 5, 10],
        }
    }
}

/// A bitext plus the in-domain formal and informal target sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub source: PathBuf,
    pub target: PathBuf,
    pub scores: Option<PathBuf>,
    pub formal_seed: PathBuf,
    pub informal_seed: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub nbest: PathBuf,
    pub formal_refs: PathBuf,
    pub informal_refs: PathBuf,
    /// `F`, `I`, or a file with one of them per sample.
    pub contexts: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroShotSection {
    pub pair_a: CorpusSection,
    pub pair_b: CorpusSection,
    pub source: PathBuf,
    pub target: PathBuf,
    pub scores: Option<PathBuf>,
    /// Labeled pairs to aim for; defaults to the mean labeled count of the two pairs.
    pub target_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub lm: LmSection,
    #[serde(default)]
    pub prep: PrepSection,
    #[serde(default)]
    pub mining: MiningSection,
    #[serde(default)]
    pub lexicon: LexiconSection,
    #[serde(default)]
    pub rerank: RerankSection,
    pub supervised: Option<CorpusSection>,
    pub zero_shot: Option<ZeroShotSection>,
    pub evaluation: Option<EvaluationSection>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text)
            .map_err(|e| Error::Argument(format!("pipeline config: {}", e.message())))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_path(&self, relative: &str) -> PathBuf {
        self.resolve(&self.output_dir).join(relative)
    }

    pub fn selection_lm(&self) -> SelectionLmConfig {
        SelectionLmConfig {
            lm: LmConfig {
                order: self.lm.order,
                k: self.lm.k,
            },
            min_count: self.lm.min_count,
            general_sample: self.lm.general_sample,
            seed: self.seed,
        }
    }

    pub fn calibration(&self) -> CalibrationConfig {
        CalibrationConfig {
            lower: self.mining.calibration_lower,
            upper: self.mining.calibration_upper,
            steps: self.mining.calibration_steps,
            lm: self.selection_lm(),
        }
    }

    /// SHA-256 of the canonical config with the output directory blanked, so
    /// the same run written to two places carries the same hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn input_paths(&self) -> Vec<(String, &Path)> {
        let mut out: Vec<(String, &Path)> = Vec::new();
        if let Some(s) = &self.supervised {
            push_corpus(&mut out, "supervised", s);
        }
        if let Some(z) = &self.zero_shot {
            push_corpus(&mut out, "zero_shot.pair_a", &z.pair_a);
            push_corpus(&mut out, "zero_shot.pair_b", &z.pair_b);
            out.push(("zero_shot.source".into(), &z.source));
            out.push(("zero_shot.target".into(), &z.target));
            if let Some(p) = &z.scores {
                out.push(("zero_shot.scores".into(), p));
            }
        }
        if let Some(e) = &self.evaluation {
            out.push(("evaluation.nbest".into(), &e.nbest));
            out.push(("evaluation.formal_refs".into(), &e.formal_refs));
            out.push(("evaluation.informal_refs".into(), &e.informal_refs));
            if Formality::parse(&e.contexts).is_none() {
                out.push(("evaluation.contexts".into(), Path::new(&e.contexts)));
            }
        }
        out
    }

    /// Checks parameters and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        if self.supervised.is_none() && self.zero_shot.is_none() {
            return Err(Error::Argument(
                "config needs a [supervised] or [zero_shot] section".into(),
            ));
        }
        self.selection_lm().lm.validate()?;
        if self.lm.min_count == 0 {
            return Err(Error::Argument("[lm] min_count must be at least 1".into()));
        }
        self.prep.filter_config()?;
        let mode = self.mining.selection_mode()?;
        if mode == SelectionMode::Easy {
            if let Some(theta) = self.mining.theta {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(Error::Argument(format!(
                        "[mining] theta must lie in (0, 1), got {theta}"
                    )));
                }
            }
        }
        if self.mining.calibration_steps < 2
            || !(self.mining.calibration_lower < self.mining.calibration_upper)
        {
            return Err(Error::Argument(
                "[mining] calibration needs lower < upper and at least 2 steps".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lexicon.kappa_threshold) {
            return Err(Error::Argument(
                "[lexicon] kappa_threshold must lie in [0, 1]".into(),
            ));
        }
        if !self.rerank.lambda.is_finite() {
            return Err(Error::Argument("[rerank] lambda must be finite".into()));
        }
        if self.rerank.ks.is_empty() || self.rerank.ks.contains(&0) {
            return Err(Error::Argument(
                "[rerank] ks must be non-empty and positive".into(),
            ));
        }
        for (name, path) in self.input_paths() {
            let resolved = self.resolve(path);
            if !resolved.is_file() {
                return Err(Error::Data(format!(
                    "{name} refers to missing file {}",
                    resolved.display()
                )));
            }
        }
        Ok(())
    }
}

fn push_corpus<'a>(out: &mut Vec<(String, &'a Path)>, name: &str, c: &'a CorpusSection) {
    out.push((format!("{name}.source"), &c.source));
    out.push((format!("{name}.target"), &c.target));
    if let Some(p) = &c.scores {
        out.push((format!("{name}.scores"), p));
    }
    out.push((format!("{name}.formal_seed"), &c.formal_seed));
    out.push((format!("{name}.informal_seed"), &c.informal_seed));
}

/// Which side of the bitext the selection LMs score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// Labels for one corpus together with the rankings behind them.
#[derive(Debug, Clone)]
pub struct MinedCorpus {
    pub corpus: ParallelCorpus,
    pub formal_ranking: Vec<PerplexityScore>,
    pub informal_ranking: Vec<PerplexityScore>,
    pub labels: Vec<FormalityLabel>,
    pub report: SelectionReport,
}

impl MinedCorpus {
    pub fn labeled(&self) -> Result<LabeledCorpus> {
        select::labeled_corpus(&self.corpus, &self.labels)
    }

    pub fn targets_with(&self, label: FormalityLabel) -> Vec<&str> {
        self.corpus
            .pairs
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == label)
            .map(|(p, _)| p.target.as_str())
            .collect()
    }
}

/// How the threshold is picked once both rankings exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// θ rule; `None` grid-searches the fraction.
    Easy(Option<f64>),
    /// α rule; `None` calibrates against the in-domain targets.
    Full(Option<usize>),
    /// α rule at the largest α that still labels this many pairs.
    Quantity(usize),
}

/// Ranks one side of `corpus` against the two seed sets and applies `rule`.
pub fn mine_corpus<S: AsRef<str> + Sync>(
    corpus: ParallelCorpus,
    formal_seed: &[S],
    informal_seed: &[S],
    side: Side,
    rule: ThresholdRule,
    calibration: &CalibrationConfig,
) -> Result<MinedCorpus> {
    if formal_seed.is_empty() || informal_seed.is_empty() {
        return Err(Error::Data(format!(
            "seed sets must be non-empty (formal {}, informal {})",
            formal_seed.len(),
            informal_seed.len()
        )));
    }
    if corpus.is_empty() {
        return Err(Error::Data("nothing left to mine: corpus is empty".into()));
    }
    let pool: Vec<&str> = match side {
        Side::Source => corpus.sources().collect(),
        Side::Target => corpus.targets().collect(),
    };
    let formal_ranking = lm::rank_against_seed(formal_seed, &pool, &calibration.lm)?;
    let informal_ranking = lm::rank_against_seed(informal_seed, &pool, &calibration.lm)?;
    let ranks = RankedCorpus::from_rankings(&formal_ranking, &informal_ranking)?;
    let (labels, report) = match rule {
        ThresholdRule::Easy(fraction) => {
            let grid = match fraction {
                Some(f) => vec![f],
                None => select::default_theta_grid(),
            };
            let choice = select::choose_theta(&ranks, &grid)?;
            let labels = select::assign_easy(&ranks, choice.theta)?;
            let report = SelectionReport::new(SelectionMode::Easy, choice.theta, &labels);
            let report = if fraction.is_none() {
                report.with_theta_trace(&choice)
            } else {
                report
            };
            (labels, report)
        }
        ThresholdRule::Full(Some(alpha)) => {
            let labels = select::assign_full(&ranks, alpha);
            let report = SelectionReport::new(SelectionMode::Full, alpha, &labels);
            (labels, report)
        }
        ThresholdRule::Full(None) => {
            let in_domain: Vec<&str> = formal_seed
                .iter()
                .chain(informal_seed)
                .map(AsRef::as_ref)
                .collect();
            let calibrated = select::calibrate_alpha(&ranks, &corpus, &in_domain, calibration)?;
            let labels = select::assign_full(&ranks, calibrated.alpha);
            let report = SelectionReport::new(SelectionMode::Full, calibrated.alpha, &labels)
                .with_alpha_trace(&calibrated);
            (labels, report)
        }
        ThresholdRule::Quantity(target) => {
            let q = select::alpha_for_quantity(&ranks, target);
            let labels = select::assign_full(&ranks, q.alpha);
            let mut report = SelectionReport::new(SelectionMode::Full, q.alpha, &labels);
            report.notes.push(format!("target_count={target}"));
            if !q.reached {
                report.notes.push(format!(
                    "target_count {target} not reachable; alpha fell back to 0"
                ));
            }
            (labels, report)
        }
    };
    Ok(MinedCorpus {
        corpus,
        formal_ranking,
        informal_ranking,
        labels,
        report,
    })
}

/// Files written by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineSummary {
    pub config_hash: String,
    pub artifacts: Vec<String>,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    out_dir: PathBuf,
    artifacts: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl<'a> Run<'a> {
    fn write(&mut self, relative: &str, contents: &str) -> Result<()> {
        write_string(&self.out_dir.join(relative), contents)?;
        self.artifacts
            .push((relative.to_owned(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    fn write_lines(&mut self, relative: &str, lines: &[String]) -> Result<()> {
        let mut text = String::new();
        for line in lines {
            text.push_str(&corpus::unescape_unk(line));
            text.push('\n');
        }
        self.write(relative, &text)
    }

    fn manifest(&self, failed_stage: Option<&str>) -> String {
        let cfg = self.cfg;
        let mut out = String::new();
        let _ = writeln!(out, "tool_version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "config_hash={}", cfg.hash());
        let _ = writeln!(out, "seed={}", cfg.seed);
        let _ = writeln!(out, "lm.order={}", cfg.lm.order);
        let _ = writeln!(out, "lm.k={}", fmt_f64(cfg.lm.k));
        let _ = writeln!(out, "lm.min_count={}", cfg.lm.min_count);
        let _ = writeln!(out, "lm.general_sample={}", cfg.lm.general_sample);
        let _ = writeln!(out, "punct_table_version={}", prep::PUNCT_TABLE_VERSION);
        match failed_stage {
            Some(stage) => {
                let _ = writeln!(out, "status=failed");
                let _ = writeln!(out, "failed_stage={stage}");
            }
            None => {
                let _ = writeln!(out, "status=ok");
            }
        }
        for (path, digest) in &self.artifacts {
            let _ = writeln!(out, "artifact.{path}={digest}");
        }
        out
    }

    fn load_corpus(
        &self,
        source: &Path,
        target: &Path,
        scores: Option<&Path>,
    ) -> Result<ParallelCorpus> {
        let corpus = corpus::load_parallel(&self.cfg.resolve(source), &self.cfg.resolve(target))?;
        match scores {
            Some(p) => corpus.with_aux_scores(corpus::load_aux_scores(&self.cfg.resolve(p))?),
            None => Ok(corpus),
        }
    }

    fn prep(&mut self, prefix: &str, corpus: ParallelCorpus) -> Result<ParallelCorpus> {
        if !self.cfg.prep.enabled {
            return Ok(corpus);
        }
        let filter = self.cfg.prep.filter_config()?;
        let (clean, stats) = prep::clean_corpus(&corpus, &filter)?;
        debug_assert!(stats.reconciles());
        log_stats(prefix, &stats);
        self.write(&format!("{prefix}/prep.stats"), &stats.render())?;
        Ok(clean)
    }

    fn write_mined(&mut self, prefix: &str, mined: &MinedCorpus, include_none: bool) -> Result<()> {
        self.write(
            &format!("{prefix}/rank.formal.tsv"),
            &lm::ranking_to_tsv(&mined.formal_ranking),
        )?;
        self.write(
            &format!("{prefix}/rank.informal.tsv"),
            &lm::ranking_to_tsv(&mined.informal_ranking),
        )?;
        self.write(&format!("{prefix}/selection.txt"), &mined.report.render())?;
        self.write(
            &format!("{prefix}/labeled.tsv"),
            &mined.labeled()?.to_tsv(include_none),
        )
    }

    fn build_lexicon(&mut self, prefix: &str, mined: &MinedCorpus) -> Result<FormalityLexicon> {
        let lexicon = rerank::build_lexicon(
            mined.targets_with(FormalityLabel::Formal),
            mined.targets_with(FormalityLabel::Informal),
            self.cfg.lexicon.kappa_threshold,
        )?;
        self.write(&format!("{prefix}/lexicon.tsv"), &lexicon.to_tsv())?;
        Ok(lexicon)
    }

    fn seeds(&self, section: &CorpusSection) -> Result<(Vec<String>, Vec<String>)> {
        Ok((
            corpus::load_sentences(&self.cfg.resolve(&section.formal_seed))?,
            corpus::load_sentences(&self.cfg.resolve(&section.informal_seed))?,
        ))
    }

    fn supervised_rule(&self) -> Result<ThresholdRule> {
        Ok(match self.cfg.mining.selection_mode()? {
            SelectionMode::Easy => ThresholdRule::Easy(self.cfg.mining.theta),
            SelectionMode::Full => ThresholdRule::Full(self.cfg.mining.alpha),
        })
    }

    fn mine_section(
        &mut self,
        prefix: &str,
        section: &CorpusSection,
        include_none: bool,
    ) -> Result<MinedCorpus> {
        let raw = self
            .load_corpus(&section.source, &section.target, section.scores.as_deref())
            .map_err(|e| e.in_stage(format!("{prefix}/load")))?;
        let clean = self
            .prep(prefix, raw)
            .map_err(|e| e.in_stage(format!("{prefix}/prep")))?;
        let (formal, informal) = self
            .seeds(section)
            .map_err(|e| e.in_stage(format!("{prefix}/load")))?;
        let rule = self.supervised_rule()?;
        let mined = mine_corpus(
            clean,
            &formal,
            &informal,
            Side::Target,
            rule,
            &self.cfg.calibration(),
        )
        .map_err(|e| e.in_stage(format!("{prefix}/mine")))?;
        info!(
            "{prefix}: {} formal, {} informal of {}",
            mined.report.counts.formal,
            mined.report.counts.informal,
            mined.report.counts.total()
        );
        self.write_mined(prefix, &mined, include_none)?;
        Ok(mined)
    }

    fn supervised(&mut self, section: &CorpusSection) -> Result<FormalityLexicon> {
        let mined = self.mine_section("supervised", section, false)?;
        self.build_lexicon("supervised", &mined)
            .map_err(|e| e.in_stage("supervised/lexicon"))
    }

    fn zero_shot(&mut self, z: &ZeroShotSection) -> Result<FormalityLexicon> {
        let mined_a = self.mine_section("zero_shot/pair_a", &z.pair_a, true)?;
        let mined_b = self.mine_section("zero_shot/pair_b", &z.pair_b, true)?;

        let stage = "zero_shot/pivot";
        let triplets = pivot::intersect_on_source(
            &mined_a.labeled().map_err(|e| e.in_stage(stage))?,
            &mined_b.labeled().map_err(|e| e.in_stage(stage))?,
        );
        self.write("zero_shot/triplets.tsv", &triplets.to_tsv())?;
        let stats = pivot::combination_stats(&triplets);
        let mut report = triplets.coverage_summary("pair_a", "pair_b");
        report.push('\n');
        report.push_str(&stats.render_table());
        self.write("zero_shot/pivot_stats.txt", &report)?;
        let seeds = pivot::pivot_in_domain_sets(&triplets);
        self.write_lines("zero_shot/seeds.formal.txt", &seeds.formal_sources)?;
        self.write_lines("zero_shot/seeds.informal.txt", &seeds.informal_sources)?;
        if seeds.formal_sources.is_empty() || seeds.informal_sources.is_empty() {
            return Err(Error::Data(format!(
                "pivot produced {} formal and {} informal seed sources from {} triplets; \
                 both sets must be non-empty to mine the zero-shot corpus",
                seeds.formal_sources.len(),
                seeds.informal_sources.len(),
                triplets.len()
            ))
            .in_stage(stage));
        }

        let stage = "zero_shot/mine";
        let raw = self
            .load_corpus(&z.source, &z.target, z.scores.as_deref())
            .map_err(|e| e.in_stage("zero_shot/load"))?;
        let clean = self
            .prep("zero_shot", raw)
            .map_err(|e| e.in_stage("zero_shot/prep"))?;
        let target = z.target_count.unwrap_or_else(|| {
            let total = mined_a.report.counts.labeled() + mined_b.report.counts.labeled();
            select::round_half_up(total as f64 / 2.0)
        });
        let mined = mine_corpus(
            clean,
            &seeds.formal_sources,
            &seeds.informal_sources,
            Side::Source,
            ThresholdRule::Quantity(target),
            &self.cfg.calibration(),
        )
        .map_err(|e| e.in_stage(stage))?;
        self.write_mined("zero_shot", &mined, false)?;
        self.build_lexicon("zero_shot", &mined)
            .map_err(|e| e.in_stage("zero_shot/lexicon"))
    }

    fn evaluate(&mut self, e: &EvaluationSection, lexicon: &FormalityLexicon) -> Result<()> {
        let cfg = self.cfg;
        let lists = rerank::load_nbest(&cfg.resolve(&e.nbest))
            .map_err(|e| e.in_stage("evaluation/load"))?;
        let formal_refs = scorer::load_annotated(&cfg.resolve(&e.formal_refs), Formality::Formal)
            .map_err(|e| e.in_stage("evaluation/load"))?;
        let informal_refs =
            scorer::load_annotated(&cfg.resolve(&e.informal_refs), Formality::Informal)
                .map_err(|e| e.in_stage("evaluation/load"))?;
        let contexts = match Formality::parse(&e.contexts) {
            Some(c) => vec![c; lists.len()],
            None => scorer::load_contexts(
                &cfg.resolve(Path::new(&e.contexts)).to_string_lossy(),
                lists.len(),
            )
            .map_err(|e| e.in_stage("evaluation/load"))?,
        };

        let reranked = lists
            .iter()
            .zip(&contexts)
            .map(|(list, &ctx)| rerank::rerank_nbest(lexicon, list, ctx, cfg.rerank.lambda))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("evaluation/rerank"))?;
        self.write(
            "evaluation/reranked.nbest",
            &rerank::reranked_to_nbest(&reranked),
        )?;

        let model_top: Vec<&str> = lists
            .iter()
            .map(|l| l.hypotheses[0].text.as_str())
            .collect();
        let reranked_top: Vec<&str> = reranked.iter().map(|l| l.best().text.as_str()).collect();
        let model_score =
            scorer::corpus_accuracy(&model_top, &formal_refs, &informal_refs, &contexts)
                .map_err(|e| e.in_stage("evaluation/score"))?;
        let reranked_score =
            scorer::corpus_accuracy(&reranked_top, &formal_refs, &informal_refs, &contexts)
                .map_err(|e| e.in_stage("evaluation/score"))?;
        self.write("evaluation/score.model.txt", &model_score.render())?;
        self.write("evaluation/score.reranked.txt", &reranked_score.render())?;
        self.write(
            "evaluation/judgments.reranked.tsv",
            &reranked_score.judgments_tsv(),
        )?;
        if reranked_score
            .judgments
            .iter()
            .all(|j| j.verdict == Verdict::Skipped)
        {
            warn!("no evaluated samples: every hypothesis was skipped");
        }

        let settings = RerankSettings {
            lexicon,
            lambda: cfg.rerank.lambda,
        };
        let oracle = rerank::oracle_experiment(
            &lists,
            &formal_refs,
            &informal_refs,
            &contexts,
            &cfg.rerank.ks,
            Some(settings),
        )
        .map_err(|e| e.in_stage("evaluation/oracle"))?;
        self.write("evaluation/oracle.tsv", &oracle.to_tsv())
    }
}

fn log_stats(prefix: &str, stats: &FilterStats) {
    let dropped: Vec<String> = DropReason::ALL
        .iter()
        .filter_map(|r| stats.drops.get(r).map(|n| format!("{r}={n}")))
        .collect();
    info!(
        "{prefix}: kept {} of {} ({})",
        stats.output,
        stats.input,
        dropped.join(", ")
    );
}

/// Validates `cfg`, runs every configured flow and writes artifacts plus a
/// `manifest.txt` under the output directory. A failing stage still leaves the
/// artifacts written so far and a manifest naming the stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate()?;
    let mut run = Run {
        cfg,
        out_dir: cfg.resolve(&cfg.output_dir),
        artifacts: Vec::new(),
    };
    let result = run_flows(&mut run);
    let failed = match &result {
        Err(Error::Stage { stage, .. }) => Some(stage.clone()),
        Err(_) => Some("unknown".to_owned()),
        Ok(()) => None,
    };
    let manifest = run.manifest(failed.as_deref());
    write_string(&run.out_dir.join("manifest.txt"), &manifest)?;
    result?;
    Ok(PipelineSummary {
        config_hash: cfg.hash(),
        artifacts: run.artifacts.into_iter().map(|(p, _)| p).collect(),
    })
}

fn run_flows(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let mut lexicon = None;
    if let Some(section) = &cfg.supervised {
        lexicon = Some(run.supervised(section)?);
    }
    if let Some(z) = &cfg.zero_shot {
        let zs = run.zero_shot(z)?;
        lexicon.get_or_insert(zs);
    }
    if let Some(e) = &cfg.evaluation {
        let lexicon = lexicon.expect("validated: a mining flow ran");
        run.evaluate(e, &lexicon)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_examples() {
        assert_eq!(
            best_window(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(),
            WindowChoice {
                start: 2,
                mean: 3.5
            }
        );
        let all = best_window(&[0.2, 0.4, 0.9], 3).unwrap();
        assert_eq!(all.start, 0);
        assert!((all.mean - 0.5).abs() < 1e-12);
        assert_eq!(best_window(&[0.5; 6], 2).unwrap().start, 0);
        assert!(matches!(best_window(&[0.5; 3], 4), Err(Error::Argument(_))));
        assert!(matches!(best_window(&[0.5; 3], 0), Err(Error::Argument(_))));
    }

    #[test]
    fn series_validation() {
        let lines: Vec<String> = ["0.5", "0.7"].iter().map(|s| s.to_string()).collect();
        let s = ScoreSeries::parse(&lines).unwrap();
        assert_eq!(s.ids().collect::<Vec<_>>(), vec!["0", "1"]);
        let dup: Vec<String> = ["a\t0.5", "a\t0.7"].iter().map(|s| s.to_string()).collect();
        assert!(ScoreSeries::parse(&dup).is_err());
        assert!(ScoreSeries::new(vec![("x".into(), 1.5)]).is_err());
        assert!(ScoreSeries::new(vec![]).is_err());
    }

    #[test]
    fn config_defaults_and_hash() {
        let cfg = PipelineConfig::parse(
            "output_dir = \"out\"\n[supervised]\nsource = \"a.en\"\ntarget = \"a.de\"\nformal_seed = \"f\"\ninformal_seed = \"i\"\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 13);
        assert_eq!(cfg.lm.order, 3);
        assert_eq!(cfg.mining.mode, "full");
        assert_eq!(cfg.resolve(Path::new("a.en")), PathBuf::from("/data/a.en"));
        let mut moved = cfg.clone();
        moved.output_dir = PathBuf::from("elsewhere");
        assert_eq!(cfg.hash(), moved.hash());
        let mut reseeded = cfg.clone();
        reseeded.seed = 14;
        assert_ne!(cfg.hash(), reseeded.hash());
        assert!(PipelineConfig::parse("output_dir = \"o\"\nbogus = 1\n", Path::new(".")).is_err());
    }

    #[test]
    fn missing_input_fails_validation() {
        let cfg = PipelineConfig::parse(
            "output_dir = \"out\"\n[supervised]\nsource = \"nope.en\"\ntarget = \"nope.de\"\nformal_seed = \"f\"\ninformal_seed = \"i\"\n",
            Path::new("/nonexistent-dir"),
        )
        .unwrap();
        match cfg.validate() {
            Err(Error::Data(msg)) => assert!(msg.contains("supervised.source")),
            other => panic!("{other:?}"),
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn best_window_mean_is_maximal(scores in prop::collection::vec(0.0f64..1.0, 1..60), w in 1usize..60) {
            let w = w.min(scores.len());
            let best = best_window(&scores, w).unwrap();
            for start in 0..=scores.len() - w {
                let mean = scores[start..start + w].iter().sum::<f64>() / w as f64;
                prop_assert!(mean <= best.mean);
                if start < best.start {
                    prop_assert!(mean < best.mean);
                }
            }
        }
    }
}
