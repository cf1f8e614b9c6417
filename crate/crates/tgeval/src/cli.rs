//! Command-line entry point: subcommand dispatch, global flags and the
//! exit-code taxonomy (0 ok, 1 usage, 2 data/format, 3 numerical,
//! 4 external-model failure).
//!
//! stdout carries only results; diagnostics go to stderr. `--json` switches
//! every subcommand to a machine-readable JSON record.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::corpus::{load_corpus, save_corpus, split_corpus, CorpusFormat};
use crate::embed::{
    hash_embed_corpus, load_embeddings, save_embeddings, HashEmbedderConfig, Pooling,
};
use crate::error::{Error, Result};
use crate::frechet::{fit_gaussian, frechet_distance_report};
use crate::lm::{
    external_score_report, lm_score, load_external_scores, reverse_lm_score, train_lm,
};
use crate::metrics::{EngineConfig, MetricEngine, MetricKind};
use crate::ngram::{corpus_bleu_report, self_bleu, unique_ngrams, BleuConfig, Smoothing};
use crate::perturb::{mode_drop_eval, word_dropout, word_swap, ModeDropConfig};
use crate::protocol::{
    aggregate_records, random_search, render_report, replicate_best, Model, ModelSpec, ParamMap,
    ReportFormat, RunStore, SearchConfig,
};
use crate::rng::RngSeed;

/// Global flags shared by every subcommand.
#[derive(Debug, Args)]
struct GlobalOpts {
    /// Master seed for every randomized operation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    parallelism: usize,
    /// Emit a machine-readable JSON record on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Log level for stderr diagnostics (error|warn|info|debug|trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
}

#[derive(Debug, Parser)]
#[command(
    name = "tgeval",
    version,
    about = "Evaluation toolkit for unsupervised text generation"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dataset-level BLEU of samples against a reference corpus.
    Bleu(BleuArgs),
    /// BLEU of one sample set against a second set from the same model.
    Selfbleu(SelfBleuArgs),
    /// Count distinct n-grams in a sample corpus.
    Ngrams(NgramsArgs),
    /// Embed a corpus with the builtin hashing embedder.
    Embed(EmbedArgs),
    /// Frechet distance between real and generated sentence distributions.
    Fd(FdArgs),
    /// Perplexity of samples under an LM trained on real text.
    Lmscore(LmScoreArgs),
    /// Perplexity of held-out real text under an LM trained on samples.
    Revlmscore(RevLmScoreArgs),
    /// Apply word dropout and word swapping to a corpus.
    Perturb(PerturbArgs),
    /// Mode-collapse emulation: evaluate topic-restricted samples.
    Modedrop(ModeDropArgs),
    /// Random-search hyperparameter tuning of a sample model.
    Tune(TuneArgs),
    /// Replicate a configuration and aggregate mean +/- std per metric.
    Replicate(ReplicateArgs),
    /// Re-aggregate a JSONL run store and render a report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct BleuArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Zero-precision handling: none|epsilon.
    #[arg(long, default_value = "epsilon")]
    smoothing: String,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
}

#[derive(Debug, Args)]
struct SelfBleuArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Second sample set; without it the samples are split in half.
    #[arg(long, conflicts_with = "split_seed")]
    samples2: Option<PathBuf>,
    /// Seed for the half-split (defaults to the global seed).
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value = "epsilon")]
    smoothing: String,
}

#[derive(Debug, Args)]
struct NgramsArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    /// mean|max.
    #[arg(long, default_value = "mean")]
    pooling: String,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    bigrams: bool,
}

#[derive(Debug, Args)]
struct FdArgs {
    /// Precomputed real-side embeddings (pairs with --gen-embeddings).
    #[arg(long, requires = "gen_embeddings")]
    real_embeddings: Option<PathBuf>,
    #[arg(long, requires = "real_embeddings")]
    gen_embeddings: Option<PathBuf>,
    /// Real corpus to embed with the builtin embedder (pairs with --gen).
    #[arg(long, requires = "gen", conflicts_with = "real_embeddings")]
    real: Option<PathBuf>,
    #[arg(long, requires = "real", conflicts_with = "gen_embeddings")]
    gen: Option<PathBuf>,
    /// Embedder for the corpus route; only `hash` is builtin.
    #[arg(long, default_value = "hash")]
    embedder: String,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value = "mean")]
    pooling: String,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    bigrams: bool,
}

#[derive(Debug, Args)]
struct LmScoreArgs {
    /// Real-text training corpus (pairs with --samples).
    #[arg(long, requires = "samples")]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    samples: Option<PathBuf>,
    /// Externally computed `logprob<TAB>ntokens` lines instead.
    #[arg(long, conflicts_with_all = ["train", "samples"])]
    external_scores: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Debug, Args)]
struct RevLmScoreArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    heldout: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0.0)]
    swap: f64,
    /// Corpus format for input and output: lines|topic_tsv.
    #[arg(long, default_value = "lines")]
    format: String,
}

#[derive(Debug, Args)]
struct ModeDropArgs {
    /// Topic-labeled training corpus (`topic<TAB>sentence`).
    #[arg(long)]
    train: PathBuf,
    /// Full-topic reference corpus (one sentence per line).
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    keep_k: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value = "fd,bleu,revlm")]
    metrics: String,
    /// Sample-set size drawn per repeat.
    #[arg(long, default_value_t = 2000)]
    sample_size: usize,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// Hash-embedder dimensionality for FD.
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    lm_order: usize,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Debug, Args)]
struct TuneArgs {
    /// `builtin:synthetic` or `cmd:PATH`.
    #[arg(long)]
    model: String,
    /// JSON array of search-space entries.
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long, default_value = "fd")]
    objective: String,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    heldout: PathBuf,
    #[arg(long, default_value_t = 10000)]
    samples_n: usize,
    /// JSONL trial store (truncated at start, appended per trial).
    #[arg(long, default_value = "runs.jsonl")]
    runs: PathBuf,
    /// Metrics per trial (default: the objective only).
    #[arg(long)]
    metrics: Option<String>,
    /// Wall-clock limit per external-model invocation.
    #[arg(long, default_value_t = 3600)]
    timeout_secs: u64,
    /// Write the best parameters as flat JSON here.
    #[arg(long)]
    best_out: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Debug, Args)]
struct ReplicateArgs {
    #[arg(long)]
    model: String,
    /// Flat JSON object of the configuration to replicate.
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = 7)]
    replicas: usize,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    heldout: PathBuf,
    #[arg(long, default_value_t = 10000)]
    samples_n: usize,
    /// Optional JSONL replica store.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Metrics to aggregate (default: all six).
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long, default_value_t = 3600)]
    timeout_secs: u64,
    /// Row label in reports (defaults to the model spec).
    #[arg(long)]
    label: Option<String>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    runs: PathBuf,
    /// markdown|csv|json.
    #[arg(long, default_value = "markdown")]
    format: String,
    /// Label override when the store holds a single configuration.
    #[arg(long)]
    label: Option<String>,
}

/// Parses argv, routes to the subcommand and maps errors to exit codes.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };

    init_logging(&cli.global.log_level);
    init_thread_pool(cli.global.parallelism);

    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn init_logging(level: &str) {
    let filter = match level.to_ascii_lowercase().as_str() {
        "error" => log::LevelFilter::Error,
        "warn" => log::LevelFilter::Warn,
        "info" => log::LevelFilter::Info,
        "debug" => log::LevelFilter::Debug,
        "trace" => log::LevelFilter::Trace,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new().filter_level(filter).try_init();
}

fn init_thread_pool(parallelism: usize) {
    if parallelism > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build_global();
    }
}

fn emit(json: bool, human: impl FnOnce() -> String, record: serde_json::Value) {
    if json {
        println!("{record}");
    } else {
        println!("{}", human());
    }
}

fn run(cli: Cli) -> Result<()> {
    let global = &cli.global;
    match &cli.command {
        Command::Bleu(args) => cmd_bleu(global, args),
        Command::Selfbleu(args) => cmd_selfbleu(global, args),
        Command::Ngrams(args) => cmd_ngrams(global, args),
        Command::Embed(args) => cmd_embed(global, args),
        Command::Fd(args) => cmd_fd(global, args),
        Command::Lmscore(args) => cmd_lmscore(global, args),
        Command::Revlmscore(args) => cmd_revlmscore(global, args),
        Command::Perturb(args) => cmd_perturb(global, args),
        Command::Modedrop(args) => cmd_modedrop(global, args),
        Command::Tune(args) => cmd_tune(global, args),
        Command::Replicate(args) => cmd_replicate(global, args),
        Command::Report(args) => cmd_report(global, args),
    }
}

fn parse_smoothing(text: &str) -> Result<Smoothing> {
    match text {
        "none" => Ok(Smoothing::None),
        "epsilon" => Ok(Smoothing::Epsilon),
        other => Err(Error::InvalidArgument(format!(
            "smoothing must be none|epsilon, got {other:?}"
        ))),
    }
}

fn parse_pooling(text: &str) -> Result<Pooling> {
    match text {
        "mean" => Ok(Pooling::Mean),
        "max" => Ok(Pooling::Max),
        other => Err(Error::InvalidArgument(format!(
            "pooling must be mean|max, got {other:?}"
        ))),
    }
}

fn parse_corpus_format(text: &str) -> Result<CorpusFormat> {
    match text {
        "lines" => Ok(CorpusFormat::Lines),
        "topic_tsv" | "tsv" => Ok(CorpusFormat::TopicTsv),
        other => Err(Error::InvalidArgument(format!(
            "format must be lines|topic_tsv, got {other:?}"
        ))),
    }
}

fn cmd_bleu(global: &GlobalOpts, args: &BleuArgs) -> Result<()> {
    let samples = load_corpus(&args.samples, CorpusFormat::Lines)?;
    let reference = load_corpus(&args.reference, CorpusFormat::Lines)?;
    let cfg = BleuConfig {
        max_order: args.order,
        smoothing: parse_smoothing(&args.smoothing)?,
        epsilon: args.epsilon,
    };
    let report = corpus_bleu_report(&samples, &reference, &cfg)?;
    emit(
        global.json,
        || format!("{}", report.bleu),
        serde_json::json!({
            "bleu": report.bleu,
            "order": args.order,
            "precisions": report.precisions,
            "clipped": report.clipped,
            "totals": report.totals,
        }),
    );
    Ok(())
}

fn cmd_selfbleu(global: &GlobalOpts, args: &SelfBleuArgs) -> Result<()> {
    let samples = load_corpus(&args.samples, CorpusFormat::Lines)?;
    let cfg = BleuConfig {
        max_order: args.order,
        smoothing: parse_smoothing(&args.smoothing)?,
        ..BleuConfig::default()
    };
    let (value, mode) = match &args.samples2 {
        Some(path) => {
            let second = load_corpus(path, CorpusFormat::Lines)?;
            (self_bleu(&samples, &second, &cfg)?, "two-sets")
        }
        None => {
            let seed = RngSeed(args.split_seed.unwrap_or(global.seed));
            let (a, b) = split_corpus(&samples, 0.5, seed)?;
            (self_bleu(&a, &b, &cfg)?, "split-half")
        }
    };
    emit(
        global.json,
        || format!("{value}"),
        serde_json::json!({ "self_bleu": value, "order": args.order, "mode": mode }),
    );
    Ok(())
}

fn cmd_ngrams(global: &GlobalOpts, args: &NgramsArgs) -> Result<()> {
    let samples = load_corpus(&args.samples, CorpusFormat::Lines)?;
    let count = unique_ngrams(&samples, args.order)?;
    emit(
        global.json,
        || format!("{count}"),
        serde_json::json!({ "unique_ngrams": count, "order": args.order }),
    );
    Ok(())
}

fn embedder_config(
    dim: usize,
    pooling: &str,
    bigrams: bool,
    seed: u64,
) -> Result<HashEmbedderConfig> {
    Ok(HashEmbedderConfig {
        dim,
        pooling: parse_pooling(pooling)?,
        use_bigrams: bigrams,
        seed: RngSeed(seed),
    })
}

fn cmd_embed(global: &GlobalOpts, args: &EmbedArgs) -> Result<()> {
    let samples = load_corpus(&args.samples, CorpusFormat::Lines)?;
    let cfg = embedder_config(args.dim, &args.pooling, args.bigrams, global.seed)?;
    let set = hash_embed_corpus(&samples, &cfg)?;
    save_embeddings(&set, &args.out)?;
    emit(
        global.json,
        || {
            format!(
                "wrote {} x {} embeddings to {}",
                set.len(),
                set.dim(),
                args.out.display()
            )
        },
        serde_json::json!({ "n": set.len(), "dim": set.dim(), "out": args.out }),
    );
    Ok(())
}

fn cmd_fd(global: &GlobalOpts, args: &FdArgs) -> Result<()> {
    let (real, gen) = match (
        &args.real_embeddings,
        &args.gen_embeddings,
        &args.real,
        &args.gen,
    ) {
        (Some(real_path), Some(gen_path), None, None) => {
            (load_embeddings(real_path)?, load_embeddings(gen_path)?)
        }
        (None, None, Some(real_path), Some(gen_path)) => {
            if args.embedder != "hash" {
                return Err(Error::InvalidArgument(format!(
                    "only the builtin `hash` embedder is available, got {:?}",
                    args.embedder
                )));
            }
            let cfg = embedder_config(args.dim, &args.pooling, args.bigrams, global.seed)?;
            let real = load_corpus(real_path, CorpusFormat::Lines)?;
            let gen = load_corpus(gen_path, CorpusFormat::Lines)?;
            (
                hash_embed_corpus(&real, &cfg)?,
                hash_embed_corpus(&gen, &cfg)?,
            )
        }
        _ => {
            return Err(Error::InvalidArgument(
                "fd needs either --real-embeddings/--gen-embeddings or --real/--gen".into(),
            ))
        }
    };
    let real_stats = fit_gaussian(&real)?;
    let gen_stats = fit_gaussian(&gen)?;
    let report = frechet_distance_report(&real_stats, &gen_stats)?;
    if report.jitter.is_some() {
        log::warn!("fd: jitter applied to near-singular covariances");
    }
    let mut record = serde_json::to_value(&report).expect("fd report serializes");
    record["real_source"] = serde_json::json!(real.source_tag());
    record["gen_source"] = serde_json::json!(gen.source_tag());
    emit(global.json, || format!("{}", report.fd), record);
    Ok(())
}

fn cmd_lmscore(global: &GlobalOpts, args: &LmScoreArgs) -> Result<()> {
    let report = match (&args.external_scores, &args.train, &args.samples) {
        (Some(path), None, None) => external_score_report(&load_external_scores(path)?)?,
        (None, Some(train_path), Some(samples_path)) => {
            let train = load_corpus(train_path, CorpusFormat::Lines)?;
            let samples = load_corpus(samples_path, CorpusFormat::Lines)?;
            let model = train_lm(&train, args.order, args.min_count)?;
            lm_score(&model, &samples)?
        }
        _ => {
            return Err(Error::InvalidArgument(
                "lmscore needs --train/--samples or --external-scores".into(),
            ))
        }
    };
    emit(
        global.json,
        || format!("{}", report.per_token_ppl),
        serde_json::to_value(&report).expect("score report serializes"),
    );
    Ok(())
}

fn cmd_revlmscore(global: &GlobalOpts, args: &RevLmScoreArgs) -> Result<()> {
    let samples = load_corpus(&args.samples, CorpusFormat::Lines)?;
    let heldout = load_corpus(&args.heldout, CorpusFormat::Lines)?;
    let report = reverse_lm_score(&samples, &heldout, args.order, args.min_count)?;
    emit(
        global.json,
        || format!("{}", report.per_token_ppl),
        serde_json::to_value(&report).expect("score report serializes"),
    );
    Ok(())
}

fn cmd_perturb(global: &GlobalOpts, args: &PerturbArgs) -> Result<()> {
    let format = parse_corpus_format(&args.format)?;
    let corpus = load_corpus(&args.input, format)?;
    let seed = RngSeed(global.seed);
    let dropped = word_dropout(&corpus, args.dropout, crate::rng::derive_seed(seed, 1))?;
    let swapped = word_swap(&dropped, args.swap, crate::rng::derive_seed(seed, 2))?;
    save_corpus(&swapped, &args.out, format)?;
    emit(
        global.json,
        || {
            format!(
                "wrote {} sentences to {}",
                swapped.len(),
                args.out.display()
            )
        },
        serde_json::json!({
            "sentences": swapped.len(),
            "out": args.out,
            "dropout": args.dropout,
            "swap": args.swap,
        }),
    );
    Ok(())
}

fn engine_config(args: &EngineArgs, seed: u64) -> EngineConfig {
    EngineConfig {
        embedder: HashEmbedderConfig {
            dim: args.dim,
            seed: RngSeed(seed),
            ..HashEmbedderConfig::default()
        },
        lm_order: args.lm_order,
        lm_min_count: args.min_count,
        ..EngineConfig::default()
    }
}

fn cmd_modedrop(global: &GlobalOpts, args: &ModeDropArgs) -> Result<()> {
    let train = load_corpus(&args.train, CorpusFormat::TopicTsv)?;
    let reference = load_corpus(&args.reference, CorpusFormat::Lines)?;
    let cfg = ModeDropConfig {
        keep_k: args.keep_k,
        repeats: args.repeats,
        sample_size: args.sample_size,
        metrics: MetricKind::parse_list(&args.metrics)?,
        seed: RngSeed(global.seed),
        engine: engine_config(&args.engine, global.seed),
    };
    let report = mode_drop_eval(&train, &reference, &cfg)?;
    emit(
        global.json,
        || {
            report
                .means
                .iter()
                .map(|(name, value)| format!("{name} {value}"))
                .collect::<Vec<_>>()
                .join("\n")
        },
        serde_json::to_value(&report).expect("mode-drop report serializes"),
    );
    Ok(())
}

fn load_params(path: &PathBuf) -> Result<ParamMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let params: ParamMap =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
    Ok(params)
}

fn cmd_tune(global: &GlobalOpts, args: &TuneArgs) -> Result<()> {
    let reference = load_corpus(&args.reference, CorpusFormat::Lines)?;
    let heldout = load_corpus(&args.heldout, CorpusFormat::Lines)?;
    let space = crate::protocol::HyperparamSpace::load(&args.space)?;
    let objective = MetricKind::parse(&args.objective)?;
    let metrics = match &args.metrics {
        Some(text) => MetricKind::parse_list(text)?,
        None => vec![objective],
    };

    let spec: ModelSpec = args.model.parse()?;
    let model = Model::from_spec(&spec, &reference, Duration::from_secs(args.timeout_secs));
    let mut engine =
        MetricEngine::new(reference, heldout, engine_config(&args.engine, global.seed))?;
    engine.prepare(&metrics)?;

    let store = RunStore::create(&args.runs)?;
    let cfg = SearchConfig {
        budget: args.budget,
        objective,
        metrics,
        sample_n: args.samples_n,
        seed: RngSeed(global.seed),
    };
    let result = random_search(&model, &space, &engine, &cfg, Some(&store))?;

    if let Some(path) = &args.best_out {
        let body = serde_json::to_string_pretty(&result.best.params).expect("params serialize");
        std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }

    let ok = result.trials.iter().filter(|t| t.is_ok()).count();
    emit(
        global.json,
        || {
            let params = result
                .best
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            format!(
                "best trial {} {}={} {}",
                result.best.trial_id,
                objective.name(),
                result.best.metrics[objective.name()],
                params
            )
        },
        serde_json::json!({
            "best": result.best,
            "ok_trials": ok,
            "budget": args.budget,
            "runs": args.runs,
        }),
    );
    Ok(())
}

fn cmd_replicate(global: &GlobalOpts, args: &ReplicateArgs) -> Result<()> {
    let reference = load_corpus(&args.reference, CorpusFormat::Lines)?;
    let heldout = load_corpus(&args.heldout, CorpusFormat::Lines)?;
    let params = load_params(&args.params)?;
    let metrics = match &args.metrics {
        Some(text) => MetricKind::parse_list(text)?,
        None => MetricKind::all().to_vec(),
    };
    let spec: ModelSpec = args.model.parse()?;
    let model = Model::from_spec(&spec, &reference, Duration::from_secs(args.timeout_secs));
    let mut engine =
        MetricEngine::new(reference, heldout, engine_config(&args.engine, global.seed))?;
    engine.prepare(&metrics)?;

    let store = match &args.runs {
        Some(path) => Some(RunStore::create(path)?),
        None => None,
    };
    let label = args.label.clone().unwrap_or_else(|| args.model.clone());
    let report = replicate_best(
        &model,
        &params,
        args.replicas,
        &engine,
        &metrics,
        args.samples_n,
        RngSeed(global.seed),
        store.as_ref(),
        &label,
    )?;
    emit(
        global.json,
        || render_report(std::slice::from_ref(&report), ReportFormat::Markdown).unwrap_or_default(),
        serde_json::to_value(&report).expect("aggregate report serializes"),
    );
    Ok(())
}

fn cmd_report(global: &GlobalOpts, args: &ReportArgs) -> Result<()> {
    let records = RunStore::read(&args.runs)?;
    if records.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no trial records in {}",
            args.runs.display()
        )));
    }

    // Group records by configuration; a replicate store yields one group.
    let mut keys: Vec<String> = Vec::new();
    let mut groups: Vec<(ParamMap, Vec<crate::protocol::TrialRecord>)> = Vec::new();
    for record in records {
        let key = serde_json::to_string(&record.params).expect("params serialize");
        match keys.iter().position(|k| k == &key) {
            Some(idx) => groups[idx].1.push(record),
            None => {
                keys.push(key);
                groups.push((record.params.clone(), vec![record]));
            }
        }
    }

    let single = groups.len() == 1;
    let mut reports = Vec::with_capacity(groups.len());
    for (params, records) in groups {
        let label = if single {
            args.label.clone().unwrap_or_else(|| params_label(&params))
        } else {
            params_label(&params)
        };
        reports.push(aggregate_records(label, params, records)?);
    }

    let format = if global.json {
        ReportFormat::Json
    } else {
        args.format.parse()?
    };
    print!("{}", render_report(&reports, format)?);
    Ok(())
}

fn params_label(params: &ParamMap) -> String {
    if params.is_empty() {
        return "(default)".to_string();
    }
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}
