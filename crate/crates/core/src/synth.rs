//! Deterministic synthetic bitext with known register labels.
//!
//! Sentences are bags of shared "concept" words rendered per language, plus
//! register markers drawn from disjoint formal and informal sets. Everything is
//! a function of the seed.

use std::fmt::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Formality, FormalityLabel, ParallelCorpus, SentencePair};
use crate::error::Result;
use crate::rerank::{Hypothesis, NBestList};
use crate::textio::{fmt_f64, write_string};

/// Register of a generated pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Register {
    Formal,
    Informal,
    Neutral,
}

impl Register {
    pub fn label(self) -> FormalityLabel {
        match self {
            Register::Formal => FormalityLabel::Formal,
            Register::Informal => FormalityLabel::Informal,
            Register::Neutral => FormalityLabel::None,
        }
    }
}

/// Rendering rules for one language.
#[derive(Debug, Clone, Copy)]
pub struct Language {
    pub code: &'static str,
    syllables: [&'static str; 10],
    pub formal_markers: &'static [&'static str],
    pub informal_markers: &'static [&'static str],
}

pub const ENGLISH: Language = Language {
    code: "en",
    syllables: ["ba", "de", "fi", "go", "ku", "la", "me", "ni", "po", "ru"],
    formal_markers: &["kindly", "sir", "madam", "shall", "regards"],
    informal_markers: &["hey", "gonna", "yeah", "dude", "wanna"],
};

pub const GERMAN: Language = Language {
    code: "de",
    syllables: ["ka", "te", "ri", "mo", "lu", "pa", "se", "bi", "no", "gu"],
    formal_markers: &["Sie", "Ihnen", "Ihr", "Ihre"],
    informal_markers: &["du", "dich", "dir", "dein"],
};

pub const SPANISH: Language = Language {
    code: "es",
    syllables: ["ca", "do", "fe", "ji", "lo", "ma", "nu", "pe", "ro", "ti"],
    formal_markers: &["usted", "ustedes", "su", "le"],
    informal_markers: &["tú", "te", "ti", "tu"],
};

pub const JAPANESE: Language = Language {
    code: "ja",
    syllables: ["ha", "ke", "mi", "so", "tsu", "na", "yo", "ri", "wa", "ku"],
    formal_markers: &["desu", "masu", "gozaimasu", "deshou"],
    informal_markers: &["da", "jan", "dayo", "kke"],
};

impl Language {
    /// Six-letter-or-longer word for concept `c`; never equal to a marker.
    pub fn word(&self, c: usize) -> String {
        let s = &self.syllables;
        format!("{}{}{}", s[c % 10], s[(c / 10) % 10], s[(c / 100) % 10])
    }

    pub fn markers(&self, register: Register) -> &'static [&'static str] {
        match register {
            Register::Formal => self.formal_markers,
            Register::Informal => self.informal_markers,
            Register::Neutral => &[],
        }
    }
}

/// A language-independent sentence: concept ids plus marker slots.
#[derive(Debug, Clone)]
struct Skeleton {
    concepts: Vec<usize>,
    register: Register,
    /// (insert position, marker choice) pairs, positions ≥ 1.
    markers: Vec<(usize, usize)>,
}

impl Skeleton {
    fn render(&self, lang: &Language) -> String {
        let mut words: Vec<String> = self.concepts.iter().map(|&c| lang.word(c)).collect();
        let markers = lang.markers(self.register);
        for &(pos, choice) in &self.markers {
            let pos = pos.min(words.len());
            words.insert(pos, markers[choice % markers.len()].to_owned());
        }
        words.push(".".into());
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub pairs: usize,
    pub formal_share: f64,
    pub informal_share: f64,
    /// In-domain sentences per register.
    pub seed_size: usize,
    pub concepts: usize,
    /// Zipf exponent of concept frequencies; 0 is uniform.
    pub zipf_exponent: f64,
    pub min_words: usize,
    pub max_words: usize,
    /// Chance that a word of a neutral sentence comes from outside the
    /// in-domain concept set, as in general-domain web text.
    pub neutral_off_domain: f64,
    pub off_domain_concepts: usize,
    /// Markers per formal or informal sentence.
    pub min_markers: usize,
    pub max_markers: usize,
    /// Share of pairs replaced by junk that the cleaning stage should remove.
    pub junk_share: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            pairs: 10_000,
            formal_share: 0.2,
            informal_share: 0.2,
            seed_size: 500,
            concepts: 120,
            zipf_exponent: 0.0,
            min_words: 4,
            max_words: 9,
            neutral_off_domain: 0.8,
            off_domain_concepts: 500,
            min_markers: 2,
            max_markers: 4,
            junk_share: 0.0,
            seed: 13,
        }
    }
}

struct Generator {
    rng: ChaCha8Rng,
    zipf: WeightedIndex<f64>,
    cfg: SynthConfig,
}

impl Generator {
    fn new(cfg: SynthConfig) -> Self {
        let weights: Vec<f64> = (0..cfg.concepts)
            .map(|c| 1.0 / ((c + 1) as f64).powf(cfg.zipf_exponent))
            .collect();
        Generator {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            zipf: WeightedIndex::new(weights).expect("positive weights"),
            cfg,
        }
    }

    fn register(&mut self) -> Register {
        let x: f64 = self.rng.gen();
        if x < self.cfg.formal_share {
            Register::Formal
        } else if x < self.cfg.formal_share + self.cfg.informal_share {
            Register::Informal
        } else {
            Register::Neutral
        }
    }

    fn skeleton(&mut self, register: Register) -> Skeleton {
        let n = self.rng.gen_range(self.cfg.min_words..=self.cfg.max_words);
        let off_domain = if register == Register::Neutral {
            self.cfg.neutral_off_domain
        } else {
            0.0
        };
        let concepts: Vec<usize> = (0..n)
            .map(|_| {
                if off_domain > 0.0 && self.rng.gen_bool(off_domain) {
                    self.cfg.concepts + self.rng.gen_range(0..self.cfg.off_domain_concepts)
                } else {
                    self.zipf.sample(&mut self.rng)
                }
            })
            .collect();
        let markers = if register == Register::Neutral {
            Vec::new()
        } else {
            let m = self
                .rng
                .gen_range(self.cfg.min_markers..=self.cfg.max_markers);
            (0..m)
                .map(|_| (self.rng.gen_range(1..=n), self.rng.gen_range(0..16)))
                .collect()
        };
        Skeleton {
            concepts,
            register,
            markers,
        }
    }

    fn score(&mut self) -> f64 {
        // Two decimals keep the score file readable.
        (self.rng.gen_range(72..=100) as f64) / 100.0
    }

    fn seed_set(&mut self, register: Register, lang: &Language) -> Vec<String> {
        (0..self.cfg.seed_size)
            .map(|_| self.skeleton(register).render(lang))
            .collect()
    }
}

/// A generated bitext, its gold registers and the two in-domain seed sets
/// (target side).
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: ParallelCorpus,
    pub truth: Vec<Register>,
    pub formal_seed: Vec<String>,
    pub informal_seed: Vec<String>,
}

fn junk_pair(
    gen: &mut Generator,
    kind: usize,
    src: &Language,
    tgt: &Language,
    prev: Option<&SentencePair>,
) -> (String, String, f64) {
    let sk = gen.skeleton(Register::Neutral);
    let (s, t) = (sk.render(src), sk.render(tgt));
    match kind % 5 {
        0 => (s.clone(), s, gen.score()),
        1 => {
            let long = format!("{} {}", t.trim_end_matches(" ."), t);
            (s, long, gen.score())
        }
        2 => match prev {
            Some(p) => (p.source.clone(), p.target.clone(), gen.score()),
            None => (s.clone(), s, gen.score()),
        },
        3 => (s, t, 0.5),
        _ => (s, String::new(), gen.score()),
    }
}

/// `cfg.pairs` pairs from `src` to `tgt`, with aux scores attached.
pub fn synthetic_corpus(cfg: &SynthConfig, src: &Language, tgt: &Language) -> SyntheticCorpus {
    let mut gen = Generator::new(*cfg);
    let formal_seed = gen.seed_set(Register::Formal, tgt);
    let informal_seed = gen.seed_set(Register::Informal, tgt);
    let mut pairs: Vec<SentencePair> = Vec::with_capacity(cfg.pairs);
    let mut scores = Vec::with_capacity(cfg.pairs);
    let mut truth = Vec::with_capacity(cfg.pairs);
    let mut junk_kind = 0;
    for i in 0..cfg.pairs {
        if gen.rng.gen::<f64>() < cfg.junk_share {
            let (s, t, score) = junk_pair(&mut gen, junk_kind, src, tgt, pairs.last());
            junk_kind += 1;
            pairs.push(SentencePair::new(i, s, t));
            scores.push(score);
            truth.push(Register::Neutral);
            continue;
        }
        let register = gen.register();
        let sk = gen.skeleton(register);
        pairs.push(SentencePair::new(i, sk.render(src), sk.render(tgt)));
        scores.push(gen.score());
        truth.push(register);
    }
    let corpus = ParallelCorpus {
        pairs,
        source_lang: src.code.into(),
        target_lang: tgt.code.into(),
    }
    .with_aux_scores(scores)
    .expect("one score per pair");
    SyntheticCorpus {
        corpus,
        truth,
        formal_seed,
        informal_seed,
    }
}

/// Two bitexts sharing part of their source side, and a third corpus to be
/// labeled from the source side alone.
#[derive(Debug, Clone)]
pub struct SyntheticPivot {
    pub pair_a: SyntheticCorpus,
    pub pair_b: SyntheticCorpus,
    pub zero_shot: SyntheticCorpus,
}

/// `pool` source skeletons; pair A takes the first 80%, pair B the last 80%.
/// The zero-shot corpus is generated from `zero_shot` on its own.
pub fn synthetic_pivot(cfg: &SynthConfig, pool: usize, zero_shot: &SynthConfig) -> SyntheticPivot {
    let mut gen = Generator::new(*cfg);
    let skeletons: Vec<Skeleton> = (0..pool)
        .map(|_| {
            let r = gen.register();
            gen.skeleton(r)
        })
        .collect();
    let cut = pool / 5;
    let build = |range: std::ops::Range<usize>, tgt: &Language, gen: &mut Generator| {
        let formal_seed = gen.seed_set(Register::Formal, tgt);
        let informal_seed = gen.seed_set(Register::Informal, tgt);
        let mut pairs = Vec::new();
        let mut truth = Vec::new();
        for (i, sk) in skeletons[range].iter().enumerate() {
            pairs.push(SentencePair::new(i, sk.render(&ENGLISH), sk.render(tgt)));
            truth.push(sk.register);
        }
        SyntheticCorpus {
            corpus: ParallelCorpus {
                pairs,
                source_lang: ENGLISH.code.into(),
                target_lang: tgt.code.into(),
            },
            truth,
            formal_seed,
            informal_seed,
        }
    };
    let pair_a = build(0..pool - cut, &GERMAN, &mut gen);
    let pair_b = build(cut..pool, &SPANISH, &mut gen);
    let zero_shot = synthetic_corpus(zero_shot, &ENGLISH, &JAPANESE);
    SyntheticPivot {
        pair_a,
        pair_b,
        zero_shot,
    }
}

/// N-best lists with annotated references and per-sample contexts.
#[derive(Debug, Clone)]
pub struct SyntheticEval {
    pub lists: Vec<NBestList>,
    /// Annotated reference lines, `[F]…[/F]` marked.
    pub formal_refs: Vec<String>,
    /// Annotated reference lines, `[I]…[/I]` marked.
    pub informal_refs: Vec<String>,
    pub contexts: Vec<Formality>,
}

/// `samples` lists of `k` hypotheses in `lang`. Every hypothesis carries one
/// marker; the top hypothesis matches the context about half the time.
pub fn synthetic_nbest(samples: usize, k: usize, lang: &Language, seed: u64) -> SyntheticEval {
    let cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let mut gen = Generator::new(cfg);
    let mut out = SyntheticEval {
        lists: Vec::with_capacity(samples),
        formal_refs: Vec::with_capacity(samples),
        informal_refs: Vec::with_capacity(samples),
        contexts: Vec::with_capacity(samples),
    };
    for s in 0..samples {
        let context = if gen.rng.gen_bool(0.5) {
            Formality::Formal
        } else {
            Formality::Informal
        };
        let sk = gen.skeleton(Register::Neutral);
        let words: Vec<String> = sk.concepts.iter().map(|&c| lang.word(c)).collect();
        let pos = gen.rng.gen_range(1..=words.len());
        let choice = gen
            .rng
            .gen_range(0..lang.formal_markers.len().min(lang.informal_markers.len()));
        let (fm, im) = (lang.formal_markers[choice], lang.informal_markers[choice]);
        let with = |marker: &str, words: &[String]| -> String {
            let mut w = words.to_vec();
            w.insert(pos.min(w.len()), marker.to_owned());
            w.push(".".into());
            w.join(" ")
        };
        out.formal_refs.push(with(&format!("[F]{fm}[/F]"), &words));
        out.informal_refs
            .push(with(&format!("[I]{im}[/I]"), &words));
        let (desired, opposite) = match context {
            Formality::Formal => (fm, im),
            Formality::Informal => (im, fm),
        };
        let mut base = -1.0 - gen.rng.gen_range(0..50) as f64 / 100.0;
        let mut hypotheses = Vec::with_capacity(k);
        for rank in 0..k {
            let p_desired = if rank == 0 { 0.5 } else { 0.35 };
            let marker = if gen.rng.gen_bool(p_desired) {
                desired
            } else {
                opposite
            };
            let mut variant = words.clone();
            // Perturb one content word so hypotheses differ.
            if rank > 0 {
                let at = gen.rng.gen_range(0..variant.len());
                variant[at] = lang.word(gen.zipf.sample(&mut gen.rng));
            }
            hypotheses.push(Hypothesis {
                text: with(marker, &variant),
                base_score: base,
                rank,
                quality_score: None,
            });
            base -= gen.rng.gen_range(1..=6) as f64 / 100.0;
            base = (base * 100.0).round() / 100.0;
        }
        out.lists.push(NBestList {
            sample_id: format!("s{s}"),
            hypotheses,
        });
        out.contexts.push(context);
    }
    out
}

pub fn nbest_to_text(lists: &[NBestList]) -> String {
    let mut out = String::new();
    for list in lists {
        for h in &list.hypotheses {
            let _ = write!(
                out,
                "{} ||| {} ||| {} ||| {}",
                list.sample_id,
                h.rank,
                fmt_f64(h.base_score),
                h.text
            );
            if let Some(q) = h.quality_score {
                let _ = write!(out, " ||| {}", fmt_f64(q));
            }
            out.push('\n');
        }
    }
    out
}

fn lines(items: impl IntoIterator<Item = impl AsRef<str>>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(item.as_ref());
        out.push('\n');
    }
    out
}

fn write_corpus(dir: &Path, stem: &str, c: &SyntheticCorpus, with_scores: bool) -> Result<()> {
    let src = &c.corpus.source_lang;
    let tgt = &c.corpus.target_lang;
    write_string(
        &dir.join(format!("{stem}.{src}")),
        &lines(c.corpus.sources()),
    )?;
    write_string(
        &dir.join(format!("{stem}.{tgt}")),
        &lines(c.corpus.targets()),
    )?;
    if with_scores {
        let scores = c
            .corpus
            .pairs
            .iter()
            .map(|p| fmt_f64(p.aux_score.unwrap_or(1.0)));
        write_string(&dir.join(format!("{stem}.scores")), &lines(scores))?;
    }
    write_string(
        &dir.join(format!("{stem}.truth")),
        &lines(c.truth.iter().map(|r| r.label().code())),
    )?;
    if !c.formal_seed.is_empty() {
        write_string(
            &dir.join(format!("{stem}.formal_seed.{tgt}")),
            &lines(&c.formal_seed),
        )?;
        write_string(
            &dir.join(format!("{stem}.informal_seed.{tgt}")),
            &lines(&c.informal_seed),
        )?;
    }
    Ok(())
}

/// Sizes of the bundled dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleConfig {
    pub supervised_pairs: usize,
    pub pivot_pool: usize,
    pub zero_shot_pairs: usize,
    /// Off-domain word share of neutral zero-shot sentences.
    pub zero_shot_off_domain: f64,
    pub eval_samples: usize,
    pub nbest_k: usize,
    pub seed: u64,
}

impl Default for BundleConfig {
    fn default() -> Self {
        BundleConfig {
            supervised_pairs: 4000,
            pivot_pool: 6000,
            zero_shot_pairs: 3000,
            zero_shot_off_domain: 0.3,
            eval_samples: 300,
            nbest_k: 10,
            seed: 13,
        }
    }
}

pub const BUNDLE_CONFIG: &str = r#"seed = 13
output_dir = "out"

[lm]
order = 3
k = 0.1
min_count = 2
general_sample = 10000

[mining]
mode = "full"

[rerank]
lambda = 1.0
ks = [1, 2, 5, 10]

[supervised]
source = "supervised/train.en"
target = "supervised/train.de"
scores = "supervised/train.scores"
formal_seed = "supervised/train.formal_seed.de"
informal_seed = "supervised/train.informal_seed.de"

[zero_shot]
source = "pivot/zs.en"
target = "pivot/zs.ja"
scores = "pivot/zs.scores"

[zero_shot.pair_a]
source = "pivot/a.en"
target = "pivot/a.de"
formal_seed = "pivot/a.formal_seed.de"
informal_seed = "pivot/a.informal_seed.de"

[zero_shot.pair_b]
source = "pivot/b.en"
target = "pivot/b.es"
formal_seed = "pivot/b.formal_seed.es"
informal_seed = "pivot/b.informal_seed.es"

[evaluation]
nbest = "eval/nbest.txt"
formal_refs = "eval/refs.formal.txt"
informal_refs = "eval/refs.informal.txt"
contexts = "eval/contexts.txt"
"#;

/// Writes the dataset and a `pipeline.toml` that runs both flows over it.
pub fn write_bundle(dir: &Path, cfg: &BundleConfig) -> Result<()> {
    let base = SynthConfig {
        seed: cfg.seed,
        seed_size: 300,
        ..SynthConfig::default()
    };
    let supervised = synthetic_corpus(
        &SynthConfig {
            pairs: cfg.supervised_pairs,
            junk_share: 0.03,
            ..base
        },
        &ENGLISH,
        &GERMAN,
    );
    write_corpus(&dir.join("supervised"), "train", &supervised, true)?;

    let pivot = synthetic_pivot(
        &SynthConfig {
            seed: cfg.seed.wrapping_add(100),
            ..base
        },
        cfg.pivot_pool,
        &SynthConfig {
            pairs: cfg.zero_shot_pairs,
            seed_size: 0,
            neutral_off_domain: cfg.zero_shot_off_domain,
            seed: cfg.seed.wrapping_add(101),
            ..base
        },
    );
    write_corpus(&dir.join("pivot"), "a", &pivot.pair_a, false)?;
    write_corpus(&dir.join("pivot"), "b", &pivot.pair_b, false)?;
    write_corpus(&dir.join("pivot"), "zs", &pivot.zero_shot, true)?;

    let eval = synthetic_nbest(
        cfg.eval_samples,
        cfg.nbest_k,
        &GERMAN,
        cfg.seed.wrapping_add(200),
    );
    let eval_dir = dir.join("eval");
    write_string(&eval_dir.join("nbest.txt"), &nbest_to_text(&eval.lists))?;
    write_string(&eval_dir.join("refs.formal.txt"), &lines(&eval.formal_refs))?;
    write_string(
        &eval_dir.join("refs.informal.txt"),
        &lines(&eval.informal_refs),
    )?;
    write_string(
        &eval_dir.join("contexts.txt"),
        &lines(eval.contexts.iter().map(|c| c.code())),
    )?;
    write_string(&dir.join("pipeline.toml"), BUNDLE_CONFIG)
}

/// Precision and recall of `labels` for `class` against `truth`, by pair index.
pub fn precision_recall(
    labels: &[(usize, FormalityLabel)],
    truth: &[Register],
    class: FormalityLabel,
) -> (Option<f64>, Option<f64>) {
    let predicted = labels.iter().filter(|(_, l)| *l == class).count();
    let hits = labels
        .iter()
        .filter(|(i, l)| *l == class && truth[*i].label() == class)
        .count();
    let actual = truth.iter().filter(|r| r.label() == class).count();
    (
        (predicted > 0).then(|| hits as f64 / predicted as f64),
        (actual > 0).then(|| hits as f64 / actual as f64),
    )
}
