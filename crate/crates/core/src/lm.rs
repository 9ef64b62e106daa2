//! Count-based n-gram language models and perplexity-difference ranking.
//!
//! Smoothing is interpolated add-k over the closed support `vocab ∪ {unk, EOS}`
//! of size `V`. With `c(h)` the count of history `h` and `h'` its one-shorter
//! suffix:
//!
//! ```text
//! p_1(w)   = (c(w) + k) / (N + kV)
//! p_m(w|h) = (c(h w) + kV · p_{m-1}(w|h')) / (c(h) + kV)
//! ```
//!
//! Unseen histories fall through to the lower order unchanged. Each level is a
//! proper distribution, so every conditional sums to one.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{tokenize, Vocabulary, UNK};
use crate::error::{Error, Result};
use crate::textio::{self, fmt_f64, read_lines};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const UNK_ID: u32 = 0;
const EOS_ID: u32 = 1;
const BOS_ID: u32 = 2;
const FIRST_TOKEN_ID: u32 = 3;

const FORMAT_MAGIC: &str = "formality-ngram";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub order: usize,
    pub k: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { order: 3, k: 0.1 }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Argument("LM order must be at least 1".into()));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Argument(format!(
                "smoothing constant k must be positive, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

type Counts = HashMap<Box<[u32]>, u64>;

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    k: f64,
    vocab: Vocabulary,
    ids: HashMap<String, u32>,
    /// `ngrams[m - 1]` holds m-gram counts.
    ngrams: Vec<Counts>,
    /// `histories[m - 1]` holds counts of the (m−1)-token histories seen by m-grams.
    histories: Vec<Counts>,
    seed: Option<u64>,
}

impl PartialEq for NGramModel {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
            && self.k.to_bits() == other.k.to_bits()
            && self.vocab == other.vocab
            && self.ngrams == other.ngrams
            && self.seed == other.seed
    }
}

fn build_ids(vocab: &Vocabulary) -> HashMap<String, u32> {
    vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_owned(), FIRST_TOKEN_ID + i as u32))
        .collect()
}

pub fn train_lm<I, S>(sentences: I, vocab: &Vocabulary, config: LmConfig) -> Result<NGramModel>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    config.validate()?;
    let mut model = NGramModel {
        order: config.order,
        k: config.k,
        vocab: vocab.clone(),
        ids: build_ids(vocab),
        ngrams: vec![Counts::new(); config.order],
        histories: vec![Counts::new(); config.order],
        seed: None,
    };
    let mut n_sentences = 0usize;
    let mut padded = Vec::new();
    for sentence in sentences {
        n_sentences += 1;
        padded.clear();
        padded.resize(config.order - 1, BOS_ID);
        padded.extend(model.map_tokens(sentence.as_ref()));
        padded.push(EOS_ID);
        for pos in (config.order - 1)..padded.len() {
            for m in 1..=config.order {
                let gram = &padded[pos + 1 - m..=pos];
                *model.ngrams[m - 1].entry(gram.into()).or_default() += 1;
                *model.histories[m - 1]
                    .entry(gram[..m - 1].into())
                    .or_default() += 1;
            }
        }
    }
    if n_sentences == 0 {
        return Err(Error::Training(
            "cannot train a language model on an empty sentence list".into(),
        ));
    }
    Ok(model)
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn set_seed(&mut self, seed: Option<u64>) {
        self.seed = seed;
    }

    /// Size of the predicted support: vocabulary plus unk and EOS.
    pub fn support_size(&self) -> usize {
        self.vocab.len() + 2
    }

    fn map_tokens<'a>(&'a self, sentence: &'a str) -> impl Iterator<Item = u32> + 'a {
        tokenize(sentence)
            .into_iter()
            .map(|t| self.ids.get(t).copied().unwrap_or(UNK_ID))
    }

    fn id_of(&self, token: &str) -> u32 {
        match token {
            EOS => EOS_ID,
            BOS => BOS_ID,
            UNK => UNK_ID,
            t => self.ids.get(t).copied().unwrap_or(UNK_ID),
        }
    }

    fn token_of<'a>(&'a self, id: u32, tokens: &[&'a str]) -> &'a str {
        match id {
            UNK_ID => UNK,
            EOS_ID => EOS,
            BOS_ID => BOS,
            _ => tokens[(id - FIRST_TOKEN_ID) as usize],
        }
    }

    /// Count of an n-gram given as surface tokens (`<s>`, `</s>` and the unk
    /// symbol are accepted; other tokens outside the vocabulary map to unk).
    pub fn count(&self, ngram: &[&str]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        let key: Vec<u32> = ngram.iter().map(|t| self.id_of(t)).collect();
        self.ngrams[ngram.len() - 1]
            .get(key.as_slice())
            .copied()
            .unwrap_or(0)
    }

    /// All stored n-grams of length `m` as surface tokens with counts, sorted.
    pub fn ngrams_of_order(&self, m: usize) -> Vec<(Vec<String>, u64)> {
        if m == 0 || m > self.order {
            return Vec::new();
        }
        let tokens: Vec<&str> = self.vocab.iter().collect();
        let mut out: Vec<(Vec<String>, u64)> = self.ngrams[m - 1]
            .iter()
            .map(|(k, c)| {
                let gram = k
                    .iter()
                    .map(|&id| self.token_of(id, &tokens).to_owned())
                    .collect();
                (gram, *c)
            })
            .collect();
        out.sort();
        out
    }

    /// Count of a history as seen by m-grams, where `m = history.len() + 1`.
    pub fn history_count(&self, history: &[&str]) -> u64 {
        if history.len() >= self.order {
            return 0;
        }
        let key: Vec<u32> = history.iter().map(|t| self.id_of(t)).collect();
        self.histories[history.len()]
            .get(key.as_slice())
            .copied()
            .unwrap_or(0)
    }

    fn prob_ids(&self, history: &[u32], word: u32, scratch: &mut Vec<u32>) -> f64 {
        let kv = self.k * self.support_size() as f64;
        let total = self.histories[0].get(&[][..]).copied().unwrap_or(0) as f64;
        let unigram = self.ngrams[0].get(&[word][..]).copied().unwrap_or(0) as f64;
        let mut p = (unigram + self.k) / (total + kv);
        for m in 2..=self.order {
            if history.len() < m - 1 {
                break;
            }
            let hist = &history[history.len() - (m - 1)..];
            let Some(&hist_count) = self.histories[m - 1].get(hist) else {
                continue;
            };
            scratch.clear();
            scratch.extend_from_slice(hist);
            scratch.push(word);
            let count = self.ngrams[m - 1]
                .get(scratch.as_slice())
                .copied()
                .unwrap_or(0) as f64;
            p = (count + kv * p) / (hist_count as f64 + kv);
        }
        p
    }

    /// Conditional probability of `word` after `history` (surface tokens; the
    /// last `order − 1` are used, missing positions are taken as `<s>`).
    pub fn prob(&self, history: &[&str], word: &str) -> f64 {
        let ids = self.padded_history(history);
        self.prob_ids(&ids, self.id_of(word), &mut Vec::new())
    }

    fn padded_history(&self, history: &[&str]) -> Vec<u32> {
        let need = self.order - 1;
        let mut ids: Vec<u32> = history.iter().map(|t| self.id_of(t)).collect();
        if ids.len() >= need {
            ids.drain(..ids.len() - need);
        } else {
            let mut padded = vec![BOS_ID; need - ids.len()];
            padded.extend(ids);
            ids = padded;
        }
        ids
    }

    /// Every predictable symbol (unk, EOS, vocabulary) with its probability after `history`.
    pub fn next_token_distribution(&self, history: &[&str]) -> Vec<(String, f64)> {
        let ids = self.padded_history(history);
        let mut scratch = Vec::new();
        let mut out = vec![
            (UNK.to_owned(), self.prob_ids(&ids, UNK_ID, &mut scratch)),
            (EOS.to_owned(), self.prob_ids(&ids, EOS_ID, &mut scratch)),
        ];
        for (i, token) in self.vocab.iter().enumerate() {
            let id = FIRST_TOKEN_ID + i as u32;
            out.push((token.to_owned(), self.prob_ids(&ids, id, &mut scratch)));
        }
        out
    }

    /// Natural-log probability of the sentence plus EOS, and the number of predictions.
    pub fn sentence_log_prob(&self, sentence: &str) -> (f64, usize) {
        let mut history = vec![BOS_ID; self.order - 1];
        let mut scratch = Vec::with_capacity(self.order);
        let mut total = 0.0;
        let mut n = 0;
        for word in self.map_tokens(sentence).chain(std::iter::once(EOS_ID)) {
            total += self.prob_ids(&history, word, &mut scratch).ln();
            n += 1;
            if self.order > 1 {
                history.remove(0);
                history.push(word);
            }
        }
        (total, n)
    }

    pub fn sentence_perplexity(&self, sentence: &str) -> f64 {
        let (log_prob, n) = self.sentence_log_prob(sentence);
        (-log_prob / n as f64).exp()
    }

    /// Mean sentence perplexity, summed in input order.
    pub fn mean_perplexity<S: AsRef<str> + Sync>(&self, sentences: &[S]) -> f64 {
        if sentences.is_empty() {
            return f64::NAN;
        }
        let pps: Vec<f64> = sentences
            .par_iter()
            .map(|s| self.sentence_perplexity(s.as_ref()))
            .collect();
        pps.iter().sum::<f64>() / pps.len() as f64
    }

    fn compatible_with(&self, other: &NGramModel) -> bool {
        self.order == other.order && self.vocab == other.vocab
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "order\t{}", self.order);
        let _ = writeln!(out, "k\t{}", fmt_f64(self.k));
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "seed\t{s}");
            }
            None => out.push_str("seed\tnone\n"),
        }
        let _ = writeln!(out, "vocab_hash\t{}", self.vocab.hash());
        let _ = writeln!(out, "vocab_size\t{}", self.vocab.len());
        let total: usize = self.ngrams.iter().map(HashMap::len).sum();
        let _ = writeln!(out, "ngram_types\t{total}");
        out.push_str("\\vocab\n");
        for token in self.vocab.iter() {
            out.push_str(token);
            out.push('\n');
        }
        out.push_str("\\counts\n");
        for (m, table) in self.ngrams.iter().enumerate() {
            let mut rows: Vec<(&Box<[u32]>, &u64)> = table.iter().collect();
            rows.sort();
            for (key, count) in rows {
                let ids: Vec<String> = key.iter().map(u32::to_string).collect();
                let _ = writeln!(out, "{}\t{}\t{}", m + 1, ids.join(" "), count);
            }
        }
        out.push_str("\\end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_lines(&read_lines(path)?)
    }

    pub fn from_lines(lines: &[String]) -> Result<Self> {
        let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.as_str()));
        let parse_err = |line: usize, message: String| Error::Parse { line, message };

        let (ln, magic) = it
            .next()
            .ok_or_else(|| parse_err(1, "empty model file".into()))?;
        if magic != format!("{FORMAT_MAGIC} {FORMAT_VERSION}") {
            return Err(parse_err(ln, format!("unsupported model header `{magic}`")));
        }
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (ln, line) = it
                .next()
                .ok_or_else(|| parse_err(0, format!("missing header field `{key}`")))?;
            match line.split_once('\t') {
                Some((k, v)) if k == key => Ok((ln, v.to_owned())),
                _ => Err(parse_err(ln, format!("expected header field `{key}`"))),
            }
        };
        let (ln, order) = header("order")?;
        let order = textio::parse_usize(&order, ln, "order")?;
        let (ln, k) = header("k")?;
        let k = textio::parse_f64(&k, ln, "k")?;
        let (ln, seed) = header("seed")?;
        let seed = match seed.as_str() {
            "none" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| parse_err(ln, "bad seed".into()))?,
            ),
        };
        let (_, vocab_hash) = header("vocab_hash")?;
        let (ln, vocab_size) = header("vocab_size")?;
        let vocab_size = textio::parse_usize(&vocab_size, ln, "vocab_size")?;
        let (ln, ngram_types) = header("ngram_types")?;
        let ngram_types = textio::parse_usize(&ngram_types, ln, "ngram_types")?;
        LmConfig { order, k }.validate()?;

        match it.next() {
            Some((_, "\\vocab")) => {}
            Some((ln, _)) => return Err(parse_err(ln, "expected `\\vocab`".into())),
            None => return Err(parse_err(0, "truncated model file".into())),
        }
        let mut tokens = Vec::with_capacity(vocab_size);
        for _ in 0..vocab_size {
            let (_, token) = it
                .next()
                .ok_or_else(|| parse_err(0, "truncated vocabulary".into()))?;
            tokens.push(token.to_owned());
        }
        let vocab = Vocabulary::new(tokens);
        if vocab.len() != vocab_size || vocab.hash() != vocab_hash {
            return Err(Error::Data(
                "model vocabulary does not match its recorded hash".into(),
            ));
        }
        match it.next() {
            Some((_, "\\counts")) => {}
            Some((ln, _)) => return Err(parse_err(ln, "expected `\\counts`".into())),
            None => return Err(parse_err(0, "truncated model file".into())),
        }
        let max_id = FIRST_TOKEN_ID as usize + vocab_size;
        let mut ngrams = vec![Counts::new(); order];
        let mut histories = vec![Counts::new(); order];
        let mut seen_end = false;
        for (ln, line) in it.by_ref() {
            if line == "\\end" {
                seen_end = true;
                break;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(ln, "expected `order<TAB>ids<TAB>count`".into()));
            }
            let m = textio::parse_usize(fields[0], ln, "n-gram order")?;
            let ids: Vec<u32> = fields[1]
                .split(' ')
                .map(|s| s.parse::<u32>().ok().filter(|&id| (id as usize) < max_id))
                .collect::<Option<_>>()
                .ok_or_else(|| parse_err(ln, "bad n-gram id".into()))?;
            if m == 0 || m > order || ids.len() != m {
                return Err(parse_err(
                    ln,
                    "n-gram length does not match its order".into(),
                ));
            }
            let count = fields[2]
                .parse::<u64>()
                .map_err(|_| parse_err(ln, "bad count".into()))?;
            *histories[m - 1].entry(ids[..m - 1].into()).or_default() += count;
            ngrams[m - 1].insert(ids.into(), count);
        }
        if !seen_end {
            return Err(parse_err(0, "missing `\\end` marker".into()));
        }
        let stored: usize = ngrams.iter().map(HashMap::len).sum();
        if stored != ngram_types {
            return Err(Error::Data(format!(
                "model declares {ngram_types} n-gram types but stores {stored}"
            )));
        }
        Ok(NGramModel {
            order,
            k,
            ids: build_ids(&vocab),
            vocab,
            ngrams,
            histories,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityScore {
    pub pair_index: usize,
    pub pp_in: f64,
    pub pp_gen: f64,
    pub diff: f64,
}

/// Scores every target under both models and sorts ascending by `pp_in − pp_gen`,
/// ties by index. Output position is the rank.
pub fn perplexity_difference_rank<S: AsRef<str> + Sync>(
    targets: &[S],
    lm_in: &NGramModel,
    lm_gen: &NGramModel,
) -> Result<Vec<PerplexityScore>> {
    if !lm_in.compatible_with(lm_gen) {
        return Err(Error::Argument(
            "ranking models must share vocabulary and order".into(),
        ));
    }
    let mut scores: Vec<PerplexityScore> = targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let pp_in = lm_in.sentence_perplexity(t.as_ref());
            let pp_gen = lm_gen.sentence_perplexity(t.as_ref());
            PerplexityScore {
                pair_index: i,
                pp_in,
                pp_gen,
                diff: pp_in - pp_gen,
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        a.diff
            .total_cmp(&b.diff)
            .then(a.pair_index.cmp(&b.pair_index))
    });
    Ok(scores)
}

pub const RANKING_HEADER: &str = "index\tpp_in\tpp_gen\tdiff";

pub fn ranking_to_tsv(scores: &[PerplexityScore]) -> String {
    let mut out = String::from(RANKING_HEADER);
    out.push('\n');
    for s in scores {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            s.pair_index,
            fmt_f64(s.pp_in),
            fmt_f64(s.pp_gen),
            fmt_f64(s.diff)
        );
    }
    out
}

pub fn write_ranking(path: &Path, scores: &[PerplexityScore]) -> Result<()> {
    textio::write_string(path, &ranking_to_tsv(scores))
}

pub fn read_ranking(path: &Path) -> Result<Vec<PerplexityScore>> {
    let mut out = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let ln = i + 1;
        if line.is_empty() || (ln == 1 && line == RANKING_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: ln,
                message: "expected `index, pp_in, pp_gen, diff`".into(),
            });
        }
        out.push(PerplexityScore {
            pair_index: textio::parse_usize(fields[0], ln, "index")?,
            pp_in: textio::parse_f64(fields[1], ln, "pp_in")?,
            pp_gen: textio::parse_f64(fields[2], ln, "pp_gen")?,
            diff: textio::parse_f64(fields[3], ln, "diff")?,
        });
    }
    Ok(out)
}

/// Draws `n` sentences without replacement (all of them when `n ≥ len`),
/// returned in their original order.
pub fn sample_sentences<S: Clone>(sentences: &[S], n: usize, seed: u64) -> Vec<S> {
    if n >= sentences.len() {
        return sentences.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, sentences.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| sentences[i].clone()).collect()
}

/// Parameters for ranking a pool against an in-domain seed set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionLmConfig {
    pub lm: LmConfig,
    pub min_count: usize,
    pub general_sample: usize,
    pub seed: u64,
}

impl Default for SelectionLmConfig {
    fn default() -> Self {
        SelectionLmConfig {
            lm: LmConfig::default(),
            min_count: 2,
            general_sample: 10_000,
            seed: 13,
        }
    }
}

/// Builds the in-domain model on `seed_sentences` and the general model on a
/// seeded sample of `pool`, both over the seed's non-singleton vocabulary.
pub fn selection_models<S, P>(
    seed_sentences: &[S],
    pool: &[P],
    config: &SelectionLmConfig,
) -> Result<(NGramModel, NGramModel)>
where
    S: AsRef<str>,
    P: AsRef<str> + Clone,
{
    let vocab = crate::corpus::extract_vocabulary(seed_sentences, config.min_count)?;
    let lm_in = train_lm(seed_sentences, &vocab, config.lm)?;
    let sample = sample_sentences(pool, config.general_sample, config.seed);
    let mut lm_gen = train_lm(&sample, &vocab, config.lm)?;
    lm_gen.set_seed(Some(config.seed));
    Ok((lm_in, lm_gen))
}

/// Ranks `pool` by perplexity difference against `seed_sentences`.
pub fn rank_against_seed<S, P>(
    seed_sentences: &[S],
    pool: &[P],
    config: &SelectionLmConfig,
) -> Result<Vec<PerplexityScore>>
where
    S: AsRef<str>,
    P: AsRef<str> + Clone + Sync,
{
    let (lm_in, lm_gen) = selection_models(seed_sentences, pool, config)?;
    perplexity_difference_rank(pool, &lm_in, &lm_gen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        Vocabulary::new(tokens.iter().copied())
    }

    #[test]
    fn unigram_counts_include_eos() {
        let lm = train_lm(["a a"], &vocab(&["a"]), LmConfig { order: 1, k: 0.1 }).unwrap();
        assert_eq!(lm.count(&["a"]), 2);
        assert_eq!(lm.count(&[EOS]), 1);
        assert_eq!(lm.count(&[UNK]), 0);
        assert_eq!(lm.ngrams_of_order(1).len(), 2);
    }

    #[test]
    fn oov_tokens_map_to_unk() {
        let lm = train_lm(["b"], &vocab(&["a"]), LmConfig { order: 1, k: 0.1 }).unwrap();
        assert_eq!(lm.count(&[UNK]), 1);
        assert_eq!(lm.count(&[EOS]), 1);
        assert_eq!(lm.count(&["a"]), 0);
    }

    #[test]
    fn bigram_counts_pad_with_bos() {
        let lm = train_lm(["a b"], &vocab(&["a", "b"]), LmConfig { order: 2, k: 0.1 }).unwrap();
        let bigrams = lm.ngrams_of_order(2);
        let expected: Vec<(Vec<String>, u64)> = vec![
            (vec![BOS.into(), "a".into()], 1),
            (vec!["a".into(), "b".into()], 1),
            (vec!["b".into(), EOS.into()], 1),
        ];
        let mut expected = expected;
        expected.sort();
        assert_eq!(bigrams, expected);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            train_lm(empty, &vocab(&["a"]), LmConfig::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn unigram_probability_matches_closed_form() {
        let lm = train_lm(["a a a"], &vocab(&["a"]), LmConfig { order: 1, k: 0.01 }).unwrap();
        let p_a: f64 = (3.0 + 0.01) / (4.0 + 0.03);
        let p_eos: f64 = (1.0 + 0.01) / (4.0 + 0.03);
        assert!((lm.prob(&[], "a") - p_a).abs() < 1e-15);
        let expected_pp = (-(p_a.ln() + p_eos.ln()) / 2.0).exp();
        assert!((lm.sentence_perplexity("a") - expected_pp).abs() < 1e-12);
    }

    #[test]
    fn empty_sentence_scores_eos_only() {
        let lm = train_lm(["a a a"], &vocab(&["a"]), LmConfig { order: 1, k: 0.01 }).unwrap();
        let p_eos: f64 = (1.0 + 0.01) / (4.0 + 0.03);
        assert!((lm.sentence_perplexity("") - 1.0 / p_eos).abs() < 1e-12);
    }

    #[test]
    fn history_counts_sum_their_extensions() {
        let sentences = ["a b a", "b b", "a c a b", ""];
        let lm = train_lm(
            sentences,
            &vocab(&["a", "b"]),
            LmConfig { order: 3, k: 0.1 },
        )
        .unwrap();
        for m in 2..=3 {
            let mut sums: HashMap<Vec<String>, u64> = HashMap::new();
            for (gram, c) in lm.ngrams_of_order(m) {
                *sums.entry(gram[..m - 1].to_vec()).or_default() += c;
            }
            for (hist, total) in sums {
                let hist: Vec<&str> = hist.iter().map(String::as_str).collect();
                assert_eq!(lm.history_count(&hist), total);
            }
        }
    }

    #[test]
    fn identical_models_give_zero_diffs_in_index_order() {
        let lm = train_lm(["a b", "b a"], &vocab(&["a", "b"]), LmConfig::default()).unwrap();
        let ranked = perplexity_difference_rank(&["b", "a b c", "a"], &lm, &lm).unwrap();
        assert!(ranked.iter().all(|s| s.diff == 0.0));
        let order: Vec<usize> = ranked.iter().map(|s| s.pair_index).collect();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn incompatible_models_are_rejected() {
        let a = train_lm(["a"], &vocab(&["a"]), LmConfig::default()).unwrap();
        let b = train_lm(["a"], &vocab(&["a", "b"]), LmConfig::default()).unwrap();
        assert!(perplexity_difference_rank(&["a"], &a, &b).is_err());
    }

    #[test]
    fn model_text_round_trips() {
        let mut lm = train_lm(
            ["Sie kommen", "Sie sind da", "x y"],
            &vocab(&["Sie", "kommen", "\\counts"]),
            LmConfig { order: 3, k: 0.25 },
        )
        .unwrap();
        lm.set_seed(Some(7));
        let text = lm.to_text();
        let lines = textio::split_lines(&text);
        let back = NGramModel::from_lines(&lines).unwrap();
        assert_eq!(back, lm);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn tampered_vocab_is_detected() {
        let lm = train_lm(["a b"], &vocab(&["a", "b"]), LmConfig::default()).unwrap();
        let text = lm.to_text().replace("\nb\n", "\nc\n");
        let lines = textio::split_lines(&text);
        assert!(NGramModel::from_lines(&lines).is_err());
    }

    #[test]
    fn sampling_is_seeded_and_ordered() {
        let pool: Vec<usize> = (0..100).collect();
        let a = sample_sentences(&pool, 10, 13);
        let b = sample_sentences(&pool, 10, 13);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_sentences(&pool, 500, 1).len(), 100);
    }
}
