use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use formality_core::corpus::{self, Formality, FormalityLabel, LabeledCorpus};
use formality_core::lm::{self, LmConfig, SelectionLmConfig};
use formality_core::pipeline::{
    self, mine_corpus, PipelineConfig, ScoreSeries, Side, ThresholdRule,
};
use formality_core::pivot::{self, TripletCorpus};
use formality_core::prep::{self, AsciiMode, FilterConfig};
use formality_core::rerank::{self, FormalityLexicon, RerankSettings};
use formality_core::scorer;
use formality_core::select::CalibrationConfig;
use formality_core::synth;
use formality_core::textio::{self, fmt_f64, write_string};
use formality_core::Error;

/// Formality-labeled corpus mining, pivoting, reranking and scoring.
#[derive(Parser)]
#[command(name = "formality", version)]
struct Cli {
    /// Seed for every random choice (general-LM sampling).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Config file: pipeline TOML for `run`, key=value filter config for `prep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a bitext (files, or source<TAB>target[<TAB>score] lines on stdin).
    Prep(PrepArgs),
    /// Train n-gram models or rank a pool by perplexity difference.
    #[command(subcommand)]
    Lm(LmCommand),
    /// Label a bitext formal, informal or neither.
    Mine(MineArgs),
    /// Join two labeled corpora on their source side.
    #[command(subcommand)]
    Pivot(PivotCommand),
    /// Build a term lexicon from a labeled corpus.
    Lexicon(LexiconArgs),
    /// Rerank n-best lists toward a target formality.
    Rerank(RerankArgs),
    /// Phrase-match accuracy of hypotheses against annotated references.
    Score(ScoreArgs),
    /// Model, oracle and reranked accuracy over n-best depths.
    Oracle(OracleArgs),
    /// Best window of consecutive checkpoints by mean accuracy.
    BestWindow(BestWindowArgs),
    /// Run the pipeline described by --config.
    Run(RunArgs),
    /// Write the synthetic dataset and its pipeline config.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PrepArgs {
    #[arg(long, requires = "tgt")]
    src: Option<PathBuf>,
    #[arg(long, requires = "src")]
    tgt: Option<PathBuf>,
    /// One confidence score per pair.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, value_enum)]
    ascii: Option<AsciiArg>,
    #[arg(long, requires = "out_tgt")]
    out_src: Option<PathBuf>,
    #[arg(long, requires = "out_src")]
    out_tgt: Option<PathBuf>,
    /// Filter statistics; stderr when omitted.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AsciiArg {
    Drop,
    Strip,
}

#[derive(Args, Clone)]
struct LmArgs {
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 0.1)]
    k: f64,
    /// Minimum count for a token to enter the vocabulary.
    #[arg(long, default_value_t = 2)]
    min_count: usize,
}

impl LmArgs {
    fn config(&self) -> LmConfig {
        LmConfig {
            order: self.order,
            k: self.k,
        }
    }
}

#[derive(Subcommand)]
enum LmCommand {
    /// Train a model on one sentence per line.
    Train {
        #[arg(long)]
        text: PathBuf,
        /// Build the vocabulary from this file instead of --text.
        #[arg(long)]
        vocab_from: Option<PathBuf>,
        #[command(flatten)]
        lm: LmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank a bitext by perplexity difference against an in-domain set.
    Rank {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        in_domain: PathBuf,
        #[arg(long, value_enum, default_value_t = SideArg::Target)]
        side: SideArg,
        #[command(flatten)]
        lm: LmArgs,
        #[arg(long, default_value_t = 10_000)]
        general_sample: usize,
        /// Keep only the N best-ranked pairs.
        #[arg(long)]
        take: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the kept pairs, in rank order, as PREFIX.<src-lang> and PREFIX.<tgt-lang>.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Source,
    Target,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Source => Side::Source,
            SideArg::Target => Side::Target,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Easy,
    Full,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    formal_seed: PathBuf,
    #[arg(long)]
    informal_seed: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    /// θ as a fraction of the corpus size, or `auto`.
    #[arg(long, default_value = "auto")]
    theta: String,
    /// α in positions, or `auto` to calibrate.
    #[arg(long, default_value = "auto")]
    alpha: String,
    /// Pick the largest α labeling at least this many pairs (full mode).
    #[arg(long, conflicts_with = "alpha")]
    target_count: Option<usize>,
    #[arg(long, value_enum, default_value_t = SideArg::Target)]
    side: SideArg,
    #[command(flatten)]
    lm: LmArgs,
    #[arg(long, default_value_t = 10_000)]
    general_sample: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write unlabeled pairs (needed by `pivot intersect`).
    #[arg(long)]
    include_none: bool,
    /// Selection report; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PivotCommand {
    Intersect {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the label-combination table.
    Stats {
        #[arg(long)]
        triplets: PathBuf,
        /// Also write the table as TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Write sources labeled formal (informal) on both sides.
    EmitSeeds {
        #[arg(long)]
        triplets: PathBuf,
        #[arg(long)]
        formal_out: PathBuf,
        #[arg(long)]
        informal_out: PathBuf,
    },
}

#[derive(Args)]
struct LexiconArgs {
    /// Labeled TSV from `mine`.
    #[arg(long)]
    labeled: PathBuf,
    #[arg(long, default_value_t = rerank::DEFAULT_KAPPA_THRESHOLD)]
    kappa_threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    nbest: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    /// `F`, `I`, or a file with one per sample.
    #[arg(long)]
    context: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RefArgs {
    #[arg(long)]
    formal_refs: PathBuf,
    #[arg(long)]
    informal_refs: PathBuf,
    /// `F`, `I`, or a file with one per sample.
    #[arg(long)]
    context: String,
}

#[derive(Args)]
struct ScoreArgs {
    /// One hypothesis per line.
    #[arg(long)]
    hyps: PathBuf,
    #[command(flatten)]
    refs: RefArgs,
    /// Per-sample verdicts as TSV.
    #[arg(long)]
    judgments: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    nbest: PathBuf,
    #[command(flatten)]
    refs: RefArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
    ks: Vec<usize>,
    /// Add a reranked column using this lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    /// TSV report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BestWindowArgs {
    /// `accuracy` or `id<TAB>accuracy` per line.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = 10)]
    window: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Toolkit errors already spell out their causes.
            match e.downcast_ref::<Error>() {
                Some(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(err.exit_code() as u8)
                }
                None => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker pool")?;
    }
    let seed = cli.seed.unwrap_or(SelectionLmConfig::default().seed);
    let config = cli.config.as_deref();
    match cli.command {
        Command::Prep(args) => prep_cmd(args, config),
        Command::Lm(cmd) => lm_cmd(cmd, seed),
        Command::Mine(args) => mine_cmd(args, seed),
        Command::Pivot(cmd) => pivot_cmd(cmd),
        Command::Lexicon(args) => lexicon_cmd(args),
        Command::Rerank(args) => rerank_cmd(args),
        Command::Score(args) => score_cmd(args),
        Command::Oracle(args) => oracle_cmd(args),
        Command::BestWindow(args) => best_window_cmd(args),
        Command::Run(args) => run_cmd(args, config, cli.seed),
        Command::Synth(args) => {
            let bundle = synth::BundleConfig {
                seed,
                ..Default::default()
            };
            synth::write_bundle(&args.out, &bundle)?;
            Ok(())
        }
    }
}

fn prep_cmd(args: PrepArgs, config: Option<&Path>) -> anyhow::Result<()> {
    let mut filter = match config {
        Some(path) => FilterConfig::load(path)?,
        None => FilterConfig::default(),
    };
    if let Some(a) = args.ascii {
        filter.ascii_mode = match a {
            AsciiArg::Drop => AsciiMode::Drop,
            AsciiArg::Strip => AsciiMode::Strip,
        };
    }
    let from_stdin = args.src.is_none();
    let corpus = match (&args.src, &args.tgt) {
        (Some(src), Some(tgt)) => {
            let c = corpus::load_parallel(src, tgt)?;
            match &args.scores {
                Some(p) => c.with_aux_scores(corpus::load_aux_scores(p)?)?,
                None => c,
            }
        }
        _ => {
            let mut text = String::new();
            io::stdin()
                .read_to_string(&mut text)
                .context("cannot read stdin")?;
            prep::parse_tsv_pairs(&textio::split_lines(&text))?
        }
    };
    let (clean, stats) = prep::clean_corpus(&corpus, &filter)?;
    match (&args.out_src, &args.out_tgt) {
        (Some(s), Some(t)) => corpus::save_parallel(&clean, s, t)?,
        _ if from_stdin => io::stdout()
            .write_all(prep::tsv_pairs(&clean).as_bytes())
            .context("cannot write stdout")?,
        _ => bail!(Error::Argument(
            "--out-src and --out-tgt are required with --src".into()
        )),
    }
    match &args.stats {
        Some(p) => write_string(p, &stats.render())?,
        None => eprint!("{}", stats.render()),
    }
    Ok(())
}

fn lm_cmd(cmd: LmCommand, seed: u64) -> anyhow::Result<()> {
    match cmd {
        LmCommand::Train {
            text,
            vocab_from,
            lm,
            out,
        } => {
            let sentences = corpus::load_sentences(&text)?;
            let vocab_source = match &vocab_from {
                Some(p) => corpus::load_sentences(p)?,
                None => sentences.clone(),
            };
            let vocab = corpus::extract_vocabulary(&vocab_source, lm.min_count)?;
            let model = lm::train_lm(&sentences, &vocab, lm.config())?;
            model.save(&out)?;
        }
        LmCommand::Rank {
            src,
            tgt,
            in_domain,
            side,
            lm,
            general_sample,
            take,
            out,
            emit,
        } => {
            let corpus = corpus::load_parallel(&src, &tgt)?;
            let seed_sentences = corpus::load_sentences(&in_domain)?;
            let pool: Vec<&str> = match side {
                SideArg::Source => corpus.sources().collect(),
                SideArg::Target => corpus.targets().collect(),
            };
            let cfg = SelectionLmConfig {
                lm: lm.config(),
                min_count: lm.min_count,
                general_sample,
                seed,
            };
            let mut ranking = lm::rank_against_seed(&seed_sentences, &pool, &cfg)?;
            if let Some(n) = take {
                ranking.truncate(n);
            }
            lm::write_ranking(&out, &ranking)?;
            if let Some(prefix) = emit {
                let kept = formality_core::corpus::ParallelCorpus {
                    pairs: ranking
                        .iter()
                        .map(|s| corpus.pairs[s.pair_index].clone())
                        .collect(),
                    source_lang: corpus.source_lang.clone(),
                    target_lang: corpus.target_lang.clone(),
                };
                let with_ext = |lang: &str| {
                    let mut p = prefix.clone().into_os_string();
                    p.push(format!(".{lang}"));
                    PathBuf::from(p)
                };
                corpus::save_parallel(
                    &kept,
                    &with_ext(&kept.source_lang),
                    &with_ext(&kept.target_lang),
                )?;
            }
        }
    }
    Ok(())
}

fn mine_cmd(args: MineArgs, seed: u64) -> anyhow::Result<()> {
    let corpus = corpus::load_parallel(&args.src, &args.tgt)?;
    let formal = corpus::load_sentences(&args.formal_seed)?;
    let informal = corpus::load_sentences(&args.informal_seed)?;
    let rule = match args.mode {
        ModeArg::Easy => ThresholdRule::Easy(match args.theta.as_str() {
            "auto" => None,
            v => Some(
                v.parse::<f64>()
                    .ok()
                    .filter(|t| *t > 0.0 && *t < 1.0)
                    .ok_or_else(|| {
                        Error::Argument(format!(
                            "--theta must be `auto` or a fraction in (0, 1), got `{v}`"
                        ))
                    })?,
            ),
        }),
        ModeArg::Full => match (args.target_count, args.alpha.as_str()) {
            (Some(n), _) => ThresholdRule::Quantity(n),
            (None, "auto") => ThresholdRule::Full(None),
            (None, v) => ThresholdRule::Full(Some(v.parse::<usize>().map_err(|_| {
                Error::Argument(format!(
                    "--alpha must be `auto` or a non-negative integer, got `{v}`"
                ))
            })?)),
        },
    };
    let calibration = CalibrationConfig {
        lm: SelectionLmConfig {
            lm: args.lm.config(),
            min_count: args.lm.min_count,
            general_sample: args.general_sample,
            seed,
        },
        ..CalibrationConfig::default()
    };
    let mined = mine_corpus(
        corpus,
        &formal,
        &informal,
        args.side.into(),
        rule,
        &calibration,
    )?;
    mined.labeled()?.write_tsv(&args.out, args.include_none)?;
    let report = mined.report.render();
    match &args.report {
        Some(p) => write_string(p, &report)?,
        None => print!("{report}"),
    }
    Ok(())
}

fn pivot_cmd(cmd: PivotCommand) -> anyhow::Result<()> {
    match cmd {
        PivotCommand::Intersect { a, b, out } => {
            let t = pivot::intersect_on_source(
                &LabeledCorpus::read_tsv(&a)?,
                &LabeledCorpus::read_tsv(&b)?,
            );
            t.save(&out)?;
            eprintln!("{}", t.coverage_summary("a", "b"));
        }
        PivotCommand::Stats { triplets, tsv } => {
            let stats = pivot::combination_stats(&TripletCorpus::load(&triplets)?);
            print!("{}", stats.render_table());
            if let Some(p) = tsv {
                write_string(&p, &stats.to_tsv())?;
            }
        }
        PivotCommand::EmitSeeds {
            triplets,
            formal_out,
            informal_out,
        } => {
            let seeds = pivot::pivot_in_domain_sets(&TripletCorpus::load(&triplets)?);
            textio::write_lines(
                &formal_out,
                seeds.formal_sources.iter().map(|s| corpus::unescape_unk(s)),
            )?;
            textio::write_lines(
                &informal_out,
                seeds
                    .informal_sources
                    .iter()
                    .map(|s| corpus::unescape_unk(s)),
            )?;
            if seeds.formal_sources.is_empty() || seeds.informal_sources.is_empty() {
                log::warn!(
                    "seed sets: {} formal, {} informal; zero-shot mining needs both",
                    seeds.formal_sources.len(),
                    seeds.informal_sources.len()
                );
            }
        }
    }
    Ok(())
}

fn lexicon_cmd(args: LexiconArgs) -> anyhow::Result<()> {
    let labeled = LabeledCorpus::read_tsv(&args.labeled)?;
    let targets = |label| {
        labeled
            .with_label(label)
            .map(|p| p.target.as_str())
            .collect::<Vec<_>>()
    };
    let lexicon = rerank::build_lexicon(
        targets(FormalityLabel::Formal),
        targets(FormalityLabel::Informal),
        args.kappa_threshold,
    )?;
    lexicon.save(&args.out)?;
    Ok(())
}

fn contexts(context: &str, n: usize) -> anyhow::Result<Vec<Formality>> {
    Ok(scorer::load_contexts(context, n)?)
}

fn rerank_cmd(args: RerankArgs) -> anyhow::Result<()> {
    let lists = rerank::load_nbest(&args.nbest)?;
    let lexicon = FormalityLexicon::load(&args.lexicon)?;
    let ctx = contexts(&args.context, lists.len())?;
    let reranked = lists
        .iter()
        .zip(&ctx)
        .map(|(l, &c)| rerank::rerank_nbest(&lexicon, l, c, args.lambda))
        .collect::<formality_core::Result<Vec<_>>>()?;
    write_string(&args.out, &rerank::reranked_to_nbest(&reranked))?;
    Ok(())
}

fn load_refs(
    refs: &RefArgs,
) -> anyhow::Result<(
    Vec<scorer::AnnotatedReference>,
    Vec<scorer::AnnotatedReference>,
)> {
    Ok((
        scorer::load_annotated(&refs.formal_refs, Formality::Formal)?,
        scorer::load_annotated(&refs.informal_refs, Formality::Informal)?,
    ))
}

fn score_cmd(args: ScoreArgs) -> anyhow::Result<()> {
    let hyps = textio::read_lines(&args.hyps)?;
    let (formal, informal) = load_refs(&args.refs)?;
    let ctx = contexts(&args.refs.context, hyps.len())?;
    let report = scorer::corpus_accuracy(&hyps, &formal, &informal, &ctx)?;
    print!("{}", report.render());
    if let Some(p) = args.judgments {
        write_string(&p, &report.judgments_tsv())?;
    }
    Ok(())
}

fn oracle_cmd(args: OracleArgs) -> anyhow::Result<()> {
    let lists = rerank::load_nbest(&args.nbest)?;
    let (formal, informal) = load_refs(&args.refs)?;
    let ctx = contexts(&args.refs.context, lists.len())?;
    let lexicon = args
        .lexicon
        .as_deref()
        .map(FormalityLexicon::load)
        .transpose()?;
    let settings = lexicon.as_ref().map(|lexicon| RerankSettings {
        lexicon,
        lambda: args.lambda,
    });
    let report = rerank::oracle_experiment(&lists, &formal, &informal, &ctx, &args.ks, settings)?;
    match &args.out {
        Some(p) => write_string(p, &report.to_tsv())?,
        None => print!("{}", report.to_tsv()),
    }
    Ok(())
}

fn best_window_cmd(args: BestWindowArgs) -> anyhow::Result<()> {
    let series = ScoreSeries::load(&args.scores)?;
    let best = series.best_window(args.window)?;
    let ids: Vec<&str> = series.ids().skip(best.start).take(args.window).collect();
    println!("start={}", best.start);
    println!("mean={}", fmt_f64(best.mean));
    println!("checkpoints={}", ids.join(","));
    Ok(())
}

fn run_cmd(args: RunArgs, config: Option<&Path>, seed: Option<u64>) -> anyhow::Result<()> {
    let Some(path) = config else {
        bail!(Error::Argument("run needs --config".into()));
    };
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = args.output_dir {
        cfg.output_dir = std::env::current_dir()
            .context("no working directory")?
            .join(dir);
    }
    let summary = pipeline::run_pipeline(&cfg)?;
    println!("config_hash={}", summary.config_hash);
    println!("artifacts={}", summary.artifacts.len());
    Ok(())
}
