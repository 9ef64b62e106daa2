//! Label assignment from formal/informal rank positions.
//!
//! A pair's `f_pos` is its 0-based position in the pool sorted against the
//! formal seed, `i_pos` the same against the informal seed. Lower is more
//! similar. Two rules are provided:
//!
//! * absolute threshold `θ`: formal iff `f_pos < θ < i_pos`, informal iff
//!   `i_pos < θ < f_pos`;
//! * relative difference `α`: formal iff `i_pos − f_pos > α`, informal iff
//!   `f_pos − i_pos > α`.

use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use crate::corpus::{FormalityLabel, LabeledCorpus, ParallelCorpus};
use crate::error::{Error, Result};
use crate::lm::{train_lm, PerplexityScore, SelectionLmConfig};
use crate::textio::fmt_f64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedCorpus {
    f_pos: Vec<usize>,
    i_pos: Vec<usize>,
}

fn is_permutation(positions: &[usize]) -> bool {
    let mut seen = vec![false; positions.len()];
    positions
        .iter()
        .all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
}

impl RankedCorpus {
    /// `f_pos[i]` and `i_pos[i]` are the positions of pair `i`.
    pub fn new(f_pos: Vec<usize>, i_pos: Vec<usize>) -> Result<Self> {
        if f_pos.len() != i_pos.len() {
            return Err(Error::LengthMismatch {
                what: "formal vs informal rank positions",
                left: f_pos.len(),
                right: i_pos.len(),
            });
        }
        if !is_permutation(&f_pos) || !is_permutation(&i_pos) {
            return Err(Error::Data(
                "rank positions must each be a permutation of 0..C".into(),
            ));
        }
        Ok(RankedCorpus { f_pos, i_pos })
    }

    /// Positions from two sorted rankings (row order is rank).
    pub fn from_rankings(formal: &[PerplexityScore], informal: &[PerplexityScore]) -> Result<Self> {
        let positions = |ranking: &[PerplexityScore]| -> Result<Vec<usize>> {
            let mut pos = vec![usize::MAX; ranking.len()];
            for (rank, score) in ranking.iter().enumerate() {
                let slot = pos.get_mut(score.pair_index).ok_or_else(|| {
                    Error::Data(format!(
                        "ranking index {} outside 0..{}",
                        score.pair_index,
                        ranking.len()
                    ))
                })?;
                if *slot != usize::MAX {
                    return Err(Error::Data(format!(
                        "ranking lists index {} twice",
                        score.pair_index
                    )));
                }
                *slot = rank;
            }
            Ok(pos)
        };
        Self::new(positions(formal)?, positions(informal)?)
    }

    pub fn size(&self) -> usize {
        self.f_pos.len()
    }

    pub fn f_pos(&self) -> &[usize] {
        &self.f_pos
    }

    pub fn i_pos(&self) -> &[usize] {
        &self.i_pos
    }

    fn positions(&self) -> impl IndexedParallelIterator<Item = (usize, usize)> + '_ {
        self.f_pos
            .par_iter()
            .copied()
            .zip(self.i_pos.par_iter().copied())
    }
}

/// Round half up, as used for every fraction-of-𝒞 threshold.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

pub fn label_easy(f_pos: usize, i_pos: usize, theta: usize) -> FormalityLabel {
    if f_pos < theta && theta < i_pos {
        FormalityLabel::Formal
    } else if i_pos < theta && theta < f_pos {
        FormalityLabel::Informal
    } else {
        FormalityLabel::None
    }
}

pub fn label_full(f_pos: usize, i_pos: usize, alpha: usize) -> FormalityLabel {
    if i_pos > f_pos && i_pos - f_pos > alpha {
        FormalityLabel::Formal
    } else if f_pos > i_pos && f_pos - i_pos > alpha {
        FormalityLabel::Informal
    } else {
        FormalityLabel::None
    }
}

/// Labels indexed by pair, under the absolute-threshold rule.
pub fn assign_easy(ranks: &RankedCorpus, theta: usize) -> Result<Vec<FormalityLabel>> {
    if theta >= ranks.size() {
        return Err(Error::Argument(format!(
            "θ = {theta} outside [0, {})",
            ranks.size()
        )));
    }
    Ok(ranks
        .positions()
        .map(|(f, i)| label_easy(f, i, theta))
        .collect())
}

/// Labels indexed by pair, under the relative-difference rule.
pub fn assign_full(ranks: &RankedCorpus, alpha: usize) -> Vec<FormalityLabel> {
    ranks
        .positions()
        .map(|(f, i)| label_full(f, i, alpha))
        .collect()
}

/// Attaches per-index labels to the pairs of `corpus`.
pub fn labeled_corpus(corpus: &ParallelCorpus, labels: &[FormalityLabel]) -> Result<LabeledCorpus> {
    if corpus.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "corpus pairs vs labels",
            left: corpus.len(),
            right: labels.len(),
        });
    }
    Ok(LabeledCorpus {
        pairs: corpus
            .pairs
            .iter()
            .cloned()
            .zip(labels.iter().copied())
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub formal: usize,
    pub informal: usize,
    pub none: usize,
}

impl LabelCounts {
    pub fn of(labels: &[FormalityLabel]) -> Self {
        let mut c = LabelCounts::default();
        for l in labels {
            match l {
                FormalityLabel::Formal => c.formal += 1,
                FormalityLabel::Informal => c.informal += 1,
                FormalityLabel::None => c.none += 1,
            }
        }
        c
    }

    pub fn labeled(&self) -> usize {
        self.formal + self.informal
    }

    pub fn total(&self) -> usize {
        self.formal + self.informal + self.none
    }
}

/// Default θ grid: 0.05, 0.10, …, 0.95.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaChoice {
    pub theta: usize,
    /// (fraction, θ, labeled count) per grid value, in grid order.
    pub trace: Vec<(f64, usize, usize)>,
}

/// Picks the θ on the grid that labels the most pairs; ties go to the smaller θ.
pub fn choose_theta(ranks: &RankedCorpus, grid: &[f64]) -> Result<ThetaChoice> {
    if grid.is_empty() {
        return Err(Error::Argument("θ grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|f| !(0.0..1.0).contains(*f)) {
        return Err(Error::Argument(format!("θ fraction {bad} outside [0, 1)")));
    }
    let size = ranks.size();
    if size == 0 {
        return Err(Error::Argument("cannot choose θ on an empty corpus".into()));
    }
    let trace: Vec<(f64, usize, usize)> = grid
        .par_iter()
        .map(|&frac| {
            let theta = round_half_up(frac * size as f64).min(size - 1);
            let labeled = ranks
                .positions()
                .filter(|&(f, i)| label_easy(f, i, theta).is_labeled())
                .count();
            (frac, theta, labeled)
        })
        .collect();
    let (_, theta, _) = trace
        .iter()
        .copied()
        .max_by(|a, b| a.2.cmp(&b.2).then(b.1.cmp(&a.1)))
        .expect("grid is non-empty");
    Ok(ThetaChoice { theta, trace })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    pub lower: f64,
    pub upper: f64,
    pub steps: usize,
    pub lm: SelectionLmConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            lower: 0.05,
            upper: 0.2,
            steps: 8,
            lm: SelectionLmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPoint {
    pub alpha: usize,
    pub labeled: usize,
    /// Mean in-domain perplexity; `None` when the candidate labeled nothing.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCalibration {
    pub alpha: usize,
    pub trace: Vec<CalibrationPoint>,
}

/// Evenly spaced integer candidates over `[lower·𝒞, upper·𝒞]`, duplicates removed.
pub fn alpha_grid(size: usize, lower: f64, upper: f64, steps: usize) -> Vec<usize> {
    let lo = lower * size as f64;
    let hi = upper * size as f64;
    let mut out: Vec<usize> = Vec::with_capacity(steps);
    for j in 0..steps {
        let alpha = round_half_up(lo + j as f64 * (hi - lo) / (steps - 1) as f64);
        if !out.contains(&alpha) {
            out.push(alpha);
        }
    }
    out
}

/// Picks the α whose labeled target sides give the lowest mean perplexity on
/// `in_domain_targets`. Each candidate LM uses the in-domain non-singleton
/// vocabulary so objectives are comparable across candidates.
pub fn calibrate_alpha<S: AsRef<str> + Sync>(
    ranks: &RankedCorpus,
    corpus: &ParallelCorpus,
    in_domain_targets: &[S],
    config: &CalibrationConfig,
) -> Result<AlphaCalibration> {
    if config.steps < 2 {
        return Err(Error::Argument("calibration needs at least 2 steps".into()));
    }
    if !(config.lower < config.upper) {
        return Err(Error::Argument(format!(
            "calibration bounds must satisfy lower < upper, got {} and {}",
            config.lower, config.upper
        )));
    }
    if corpus.len() != ranks.size() {
        return Err(Error::LengthMismatch {
            what: "corpus pairs vs ranked positions",
            left: corpus.len(),
            right: ranks.size(),
        });
    }
    if in_domain_targets.is_empty() {
        return Err(Error::Calibration(
            "no in-domain targets to evaluate".into(),
        ));
    }
    let vocab = crate::corpus::extract_vocabulary(in_domain_targets, config.lm.min_count)?;
    let candidates = alpha_grid(ranks.size(), config.lower, config.upper, config.steps);

    let trace = candidates
        .par_iter()
        .map(|&alpha| -> Result<CalibrationPoint> {
            let labels = assign_full(ranks, alpha);
            let targets: Vec<&str> = corpus
                .pairs
                .iter()
                .zip(&labels)
                .filter(|(_, l)| l.is_labeled())
                .map(|(p, _)| p.target.as_str())
                .collect();
            if targets.is_empty() {
                return Ok(CalibrationPoint {
                    alpha,
                    labeled: 0,
                    objective: None,
                });
            }
            let lm = train_lm(&targets, &vocab, config.lm.lm)?;
            Ok(CalibrationPoint {
                alpha,
                labeled: targets.len(),
                objective: Some(lm.mean_perplexity(in_domain_targets)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(usize, f64)> = None;
    for point in &trace {
        match point.objective {
            None => warn!("α = {} labels no pairs; skipped", point.alpha),
            Some(obj) => {
                let better = match best {
                    None => true,
                    Some((a, b)) => obj < b || (obj == b && point.alpha < a),
                };
                if better {
                    best = Some((point.alpha, obj));
                }
            }
        }
    }
    let (alpha, _) = best.ok_or_else(|| {
        Error::Calibration("every α candidate produced an empty labeled corpus".into())
    })?;
    Ok(AlphaCalibration { alpha, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantityAlpha {
    pub alpha: usize,
    /// False when even α = 0 labels fewer than the target.
    pub reached: bool,
}

/// Largest α in `[0, 𝒞]` whose labeled count is at least `target_count`.
pub fn alpha_for_quantity(ranks: &RankedCorpus, target_count: usize) -> QuantityAlpha {
    let size = ranks.size();
    let count_at = |alpha: usize| {
        ranks
            .positions()
            .filter(|&(f, i)| f.abs_diff(i) > alpha)
            .count()
    };
    if count_at(0) < target_count {
        warn!("no α labels {target_count} pairs; falling back to α = 0");
        return QuantityAlpha {
            alpha: 0,
            reached: false,
        };
    }
    // count_at is non-increasing; find the last α with count ≥ target.
    let (mut lo, mut hi) = (0usize, size);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if count_at(mid) >= target_count {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    QuantityAlpha {
        alpha: lo,
        reached: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Easy,
    Full,
}

impl SelectionMode {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMode::Easy => "easy",
            SelectionMode::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub mode: SelectionMode,
    pub threshold: usize,
    pub counts: LabelCounts,
    /// (candidate, objective) in candidate order; objective is the labeled count
    /// for θ and the mean in-domain perplexity for α.
    pub trace: Vec<(usize, Option<f64>)>,
    pub notes: Vec<String>,
}

impl SelectionReport {
    pub fn new(mode: SelectionMode, threshold: usize, labels: &[FormalityLabel]) -> Self {
        SelectionReport {
            mode,
            threshold,
            counts: LabelCounts::of(labels),
            trace: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_theta_trace(mut self, choice: &ThetaChoice) -> Self {
        self.trace = choice
            .trace
            .iter()
            .map(|&(_, theta, n)| (theta, Some(n as f64)))
            .collect();
        self
    }

    pub fn with_alpha_trace(mut self, calibration: &AlphaCalibration) -> Self {
        self.trace = calibration
            .trace
            .iter()
            .map(|p| (p.alpha, p.objective))
            .collect();
        self
    }

    /// Structured `key=value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let name = match self.mode {
            SelectionMode::Easy => "theta",
            SelectionMode::Full => "alpha",
        };
        let _ = writeln!(out, "mode={}", self.mode.name());
        let _ = writeln!(out, "{name}={}", self.threshold);
        let _ = writeln!(out, "corpus_size={}", self.counts.total());
        let _ = writeln!(out, "formal_count={}", self.counts.formal);
        let _ = writeln!(out, "informal_count={}", self.counts.informal);
        let _ = writeln!(out, "none_count={}", self.counts.none);
        for (candidate, objective) in &self.trace {
            let value = objective.map(fmt_f64).unwrap_or_else(|| "empty".into());
            let _ = writeln!(out, "trace.{name}.{candidate}={value}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "note={note}");
        }
        out
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn ranks() -> impl Strategy<Value = RankedCorpus> {
        (1usize..80).prop_flat_map(|n| {
            let perm = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
            (perm.clone(), perm).prop_map(|(f, i)| RankedCorpus::new(f, i).unwrap())
        })
    }

    proptest! {
        #[test]
        fn full_counts_never_grow_with_alpha(r in ranks()) {
            let counts: Vec<usize> = (0..=r.size())
                .map(|a| LabelCounts::of(&assign_full(&r, a)).labeled())
                .collect();
            prop_assert!(counts.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(*counts.last().unwrap(), 0);
        }

        #[test]
        fn labeling_is_pure(r in ranks(), a in 0usize..80) {
            prop_assert_eq!(assign_full(&r, a), assign_full(&r, a));
            let theta = a % r.size();
            prop_assert_eq!(assign_easy(&r, theta).unwrap(), assign_easy(&r, theta).unwrap());
        }

        #[test]
        fn quantity_alpha_is_the_largest_reaching_target(r in ranks(), target in 0usize..80) {
            let q = alpha_for_quantity(&r, target);
            let count = |a| LabelCounts::of(&assign_full(&r, a)).labeled();
            if target > r.size() || count(0) < target {
                prop_assert_eq!(q.alpha, 0);
            } else {
                prop_assert!(count(q.alpha) >= target);
                prop_assert!(q.alpha == r.size() || count(q.alpha + 1) < target);
            }
        }
    }
}
