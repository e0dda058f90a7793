//! `idres`: stage-per-subcommand driver for author-ID identity resolution.
//!
//! Every stage reads and writes files under `--dir` so runs can be resumed
//! or inspected between stages. Exit codes: 0 success, 1 usage error,
//! 2 data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use idres_core::blocking::{
    build_blocks, read_blocks_file, read_handle_file, write_blocks_file, write_singleton_report,
    BlockStats, MapSelection,
};
use idres_core::classifier::{
    accuracy, load_model, read_training_pairs, save_model, train_forest, write_training_pairs,
    ForestParams, DEFAULT_LINK_THRESHOLD,
};
use idres_core::config::KeyValueFile;
use idres_core::corpus::{
    build_frequency_tables, ingest_corpus, parse_author_id, Corpus, DEFAULT_MAX_RECORD_BYTES,
};
use idres_core::evaluation::{group_stats, pairwise_metrics, read_truth_file, write_truth_file};
use idres_core::filters::{FilterConfig, Filters};
use idres_core::io::{write_lines, Compression};
use idres_core::resolution::{
    read_alias_map, resolve_all, write_alias_map, write_hashed_alias_map, write_skipped_blocks,
    DEFAULT_MAX_BLOCK_SIZE,
};
use idres_core::similarity::pair_features;
use idres_core::synthgen::{generate_corpus, generate_training_pairs, SynthConfig};

const CORPUS: &str = "corpus.txt";
const TRUTH: &str = "truth.txt";
const PAIRS: &str = "pairs.txt";
const BLOCKS: &str = "blocks.txt.gz";
const SINGLETONS: &str = "singletons.txt";
const BLOCK_STATS: &str = "block_stats.txt";
const MODEL: &str = "model.txt";
const ALIASES: &str = "aliases.txt";
const SKIPPED: &str = "skipped_blocks.txt";
const HASHED: &str = "aliases.sha1.txt";
const METRICS: &str = "metrics.txt";

/// Config-file keys understood besides the filter keys.
const RUN_KEYS: &[&str] = &[
    "max_record_bytes",
    "maps",
    "max_block_size",
    "link_threshold",
    "workers",
    "seed",
    "trees",
    "max_depth",
    "min_leaf",
    "features_per_split",
];

#[derive(Parser, Debug)]
#[command(
    name = "idres",
    version,
    about = "Resolve git author IDs into developer identities"
)]
struct Cli {
    /// Working directory holding stage inputs and outputs.
    #[arg(long, global = true, default_value = ".")]
    dir: PathBuf,

    /// `key=value` configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus, its ground truth, and labeled training pairs.
    Synth(SynthArgs),
    /// Block the corpus by shared email, uncommon name and handle.
    Block(BlockArgs),
    /// Train the pair classifier on labeled pairs.
    Train(TrainArgs),
    /// Score pairs inside blocks and write the alias map.
    Resolve(ResolveArgs),
    /// Compare an alias map against ground truth.
    Eval(EvalArgs),
    /// Write the alias map with every ID replaced by its SHA1.
    Hash(HashArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    developers: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Positive training pairs to sample.
    #[arg(long, default_value_t = 2000)]
    pairs_pos: usize,
    /// Negative training pairs to sample.
    #[arg(long, default_value_t = 2000)]
    pairs_neg: usize,
    /// Fraction of developers sharing a handful of very common names.
    #[arg(long)]
    common_name_fraction: Option<f64>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// Emails used by more IDs than this are junk.
    #[arg(long)]
    junk_threshold: Option<u64>,
    /// Junk-email regex; repeat to give several. Replaces the defaults.
    #[arg(long = "junk-pattern")]
    junk_patterns: Vec<String>,
    #[arg(long)]
    min_email_len: Option<usize>,
    #[arg(long)]
    name_min_token_len: Option<usize>,
    /// Name token never used for blocking; repeat to give several. Replaces the defaults.
    #[arg(long = "name-stop")]
    name_stops: Vec<String>,
    /// Name groups larger than this are treated as common names and dropped.
    #[arg(long)]
    name_group_max: Option<usize>,
}

#[derive(Args, Debug)]
struct BlockArgs {
    /// Comma-separated maps to close over: email, name, handle.
    #[arg(long)]
    maps: Option<MapSelection>,
    /// `handle;author_id` lines linking IDs through a hosting-site login.
    #[arg(long)]
    handles: Option<PathBuf>,
    #[arg(long)]
    max_record_bytes: Option<usize>,
    #[command(flatten)]
    filters: FilterArgs,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    blocks_out: Option<PathBuf>,
    #[arg(long)]
    singletons_out: Option<PathBuf>,
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    features_per_split: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ResolveArgs {
    /// Link a pair when its predicted probability reaches this value.
    #[arg(long)]
    link_threshold: Option<f64>,
    /// Resolution threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Blocks with more IDs than this are skipped and reported.
    #[arg(long)]
    max_block_size: Option<usize>,
    #[arg(long)]
    max_record_bytes: Option<usize>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    blocks: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    aliases_out: Option<PathBuf>,
    #[arg(long)]
    skipped_out: Option<PathBuf>,
    /// Also write the hashed alias map to this path.
    #[arg(long)]
    hashed_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Corpus used to map sanitized alias-map fields back to raw IDs.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HashArgs {
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Corpus used to recover raw IDs before hashing.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("idres: {}", one_line(&e));
            ExitCode::from(2)
        }
    }
}

/// Joins the error chain, dropping causes already spelled out by an outer message.
fn one_line(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if out.contains(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out.replace('\n', " ")
}

/// Stage context: working directory plus the optional config file.
struct Ctx {
    dir: PathBuf,
    file: KeyValueFile,
}

impl Ctx {
    fn path(&self, flag: Option<PathBuf>, default: &str) -> PathBuf {
        flag.unwrap_or_else(|| self.dir.join(default))
    }

    /// Flag value if given, else the config-file value, else `default`.
    fn value<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.file.parse_value(key)?.unwrap_or(default))
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => {
            let file = KeyValueFile::load(path)?;
            let known: Vec<&str> = FilterConfig::FILE_KEYS
                .iter()
                .chain(RUN_KEYS)
                .copied()
                .collect();
            file.check_keys(&known)?;
            file
        }
        None => KeyValueFile::default(),
    };
    let ctx = Ctx { dir: cli.dir, file };
    match cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Block(a) => cmd_block(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Resolve(a) => cmd_resolve(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Hash(a) => cmd_hash(&ctx, a),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("{}: cannot create directory", dir.display()))
}

fn load_corpus(path: &Path, max_record_bytes: usize) -> Result<Corpus> {
    let corpus = ingest_corpus(path, max_record_bytes)?;
    eprintln!(
        "read {} records from {} ({} duplicates)",
        corpus.records.len(),
        path.display(),
        corpus.duplicates
    );
    eprintln!("skipped {} records", corpus.skipped);
    Ok(corpus)
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let seed = ctx.value(a.seed, "seed", 42)?;
    let mut cfg = SynthConfig {
        n_developers: a.developers,
        seed,
        ..SynthConfig::default()
    };
    if let Some(f) = a.common_name_fraction {
        cfg.common_name_fraction = f;
    }
    let synth = generate_corpus(&cfg)?;
    let pairs =
        generate_training_pairs(&synth.truth, a.pairs_pos, a.pairs_neg, seed.wrapping_add(1))?;

    ensure_dir(&ctx.dir)?;
    let corpus_path = ctx.path(a.corpus, CORPUS);
    write_lines(
        &corpus_path,
        Compression::from_path(&corpus_path),
        &synth.ids,
    )?;
    write_truth_file(&synth.truth, &ctx.path(a.truth, TRUTH))?;
    write_training_pairs(&pairs, &ctx.path(a.pairs, PAIRS))?;

    let mut counts = synth.alias_counts.clone();
    counts.sort_unstable();
    eprintln!(
        "generated {} IDs for {} developers (median aliases {}), {} training pairs",
        synth.ids.len(),
        cfg.n_developers,
        counts
            .get(counts.len().saturating_sub(1) / 2)
            .copied()
            .unwrap_or(0),
        pairs.len()
    );
    Ok(())
}

fn filter_config(ctx: &Ctx, a: FilterArgs) -> Result<FilterConfig> {
    let mut cfg = FilterConfig::default();
    cfg.apply_file(&ctx.file)?;
    if let Some(v) = a.junk_threshold {
        cfg.junk_email_freq_threshold = v;
    }
    if !a.junk_patterns.is_empty() {
        cfg.junk_email_patterns = a.junk_patterns;
    }
    if let Some(v) = a.min_email_len {
        cfg.min_email_len = v;
    }
    if let Some(v) = a.name_min_token_len {
        cfg.name_min_token_len = v;
    }
    if !a.name_stops.is_empty() {
        cfg.name_stoplist = a.name_stops.iter().map(|s| s.to_lowercase()).collect();
    }
    if let Some(v) = a.name_group_max {
        cfg.name_group_max = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_block(ctx: &Ctx, a: BlockArgs) -> Result<()> {
    let maps = ctx.value(a.maps, "maps", MapSelection::ALL)?;
    let max_record_bytes = ctx.value(
        a.max_record_bytes,
        "max_record_bytes",
        DEFAULT_MAX_RECORD_BYTES,
    )?;
    let filters = Filters::new(filter_config(ctx, a.filters)?)?;

    let corpus = load_corpus(&ctx.path(a.corpus, CORPUS), max_record_bytes)?;
    let handles = match &a.handles {
        Some(path) => {
            let (entries, malformed) = read_handle_file(path)?;
            if malformed > 0 {
                eprintln!(
                    "skipped {malformed} malformed handle lines in {}",
                    path.display()
                );
            }
            entries
        }
        None => Vec::new(),
    };

    let started = Instant::now();
    let tables = build_frequency_tables(&corpus.records);
    let blocking = build_blocks(&corpus.records, &tables, &filters, maps, &handles);
    let stats = BlockStats::from_blocks(&blocking.blocks);

    ensure_dir(&ctx.dir)?;
    write_blocks_file(
        &blocking.blocks,
        &corpus.records,
        &tables,
        &ctx.path(a.blocks_out, BLOCKS),
    )?;
    write_singleton_report(
        &blocking.blocks,
        &corpus.records,
        &ctx.path(a.singletons_out, SINGLETONS),
    )?;
    let mut report = vec![format!("maps={maps}")];
    report.extend(stats.to_key_values());
    report.push(format!("junk_emails={}", blocking.junk_emails));
    report.push(format!("email_groups={}", blocking.email_groups));
    report.push(format!("name_groups={}", blocking.name_groups));
    report.push(format!("handle_groups={}", blocking.handle_groups));
    report.push(format!("handles_ignored={}", blocking.handles_ignored));
    let stats_path = ctx.path(a.stats_out, BLOCK_STATS);
    write_lines(&stats_path, Compression::Plain, &report)?;

    eprintln!(
        "{} blocks ({} with 2+ IDs, largest {}); pairs to score {} of {} (reduction {:.1}x) in {:.2?}",
        stats.blocks,
        stats.multi_blocks,
        stats.max_block_size,
        stats.block_pairs,
        stats.all_pairs,
        stats.reduction_factor(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let defaults = ForestParams::default();
    let params = ForestParams {
        n_trees: ctx.value(a.trees, "trees", defaults.n_trees)?,
        max_depth: ctx.value(a.max_depth, "max_depth", defaults.max_depth)?,
        min_leaf: ctx.value(a.min_leaf, "min_leaf", defaults.min_leaf)?,
        features_per_split: ctx.value(
            a.features_per_split,
            "features_per_split",
            defaults.features_per_split,
        )?,
        seed: ctx.value(a.seed, "seed", 42)?,
    };
    let pairs_path = ctx.path(a.pairs, PAIRS);
    let pairs = read_training_pairs(&pairs_path)?;
    let started = Instant::now();
    let model = train_forest(&pairs, &params).with_context(|| pairs_path.display().to_string())?;

    let samples: Vec<_> = pairs
        .iter()
        .map(|p| {
            let f = pair_features(&parse_author_id(&p.id1), &parse_author_id(&p.id2));
            (f, p.label)
        })
        .collect();
    let acc = accuracy(&model, &samples, DEFAULT_LINK_THRESHOLD);

    ensure_dir(&ctx.dir)?;
    save_model(&model, &ctx.path(a.model_out, MODEL))?;
    eprintln!(
        "trained {} trees on {} pairs in {:.2?}; training accuracy {acc:.4}",
        model.n_trees(),
        pairs.len(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_resolve(ctx: &Ctx, a: ResolveArgs) -> Result<()> {
    let threshold = ctx.value(a.link_threshold, "link_threshold", DEFAULT_LINK_THRESHOLD)?;
    if !(0.0..=1.0).contains(&threshold) {
        bail!("invalid configuration: link_threshold must be in [0, 1], got {threshold}");
    }
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let workers = ctx.value(a.workers, "workers", default_workers)?;
    if workers == 0 {
        bail!("invalid configuration: workers must be at least 1");
    }
    let max_block_size = ctx.value(a.max_block_size, "max_block_size", DEFAULT_MAX_BLOCK_SIZE)?;
    let max_record_bytes = ctx.value(
        a.max_record_bytes,
        "max_record_bytes",
        DEFAULT_MAX_RECORD_BYTES,
    )?;

    let model = load_model(&ctx.path(a.model, MODEL))?;
    let corpus = load_corpus(&ctx.path(a.corpus, CORPUS), max_record_bytes)?;
    let blocks = read_blocks_file(&ctx.path(a.blocks, BLOCKS), &corpus.records)?;

    let started = Instant::now();
    let res = resolve_all(
        &blocks,
        &corpus.records,
        &model,
        threshold,
        workers,
        max_block_size,
    )?;

    ensure_dir(&ctx.dir)?;
    write_alias_map(&res.groups, &ctx.path(a.aliases_out, ALIASES))?;
    write_skipped_blocks(&res.skipped_blocks, &ctx.path(a.skipped_out, SKIPPED))?;
    if let Some(path) = &a.hashed_out {
        write_hashed_alias_map(&res.groups, path)?;
    }
    eprintln!(
        "resolved {} blocks ({} pairs scored, {} skipped over {max_block_size} IDs) into {} alias groups in {:.2?}",
        res.blocks_processed,
        res.pairs_scored,
        res.skipped_blocks.len(),
        res.groups.len(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let corpus = match a.corpus {
        Some(path) => Some(load_corpus(&path, DEFAULT_MAX_RECORD_BYTES)?),
        None => None,
    };
    let records = corpus.as_ref().map(|c| c.records.as_slice());
    let groups = read_alias_map(&ctx.path(a.aliases, ALIASES), records)?;
    let truth_path = ctx.path(a.truth, TRUTH);
    let truth = read_truth_file(&truth_path)?;
    let metrics =
        pairwise_metrics(&groups, &truth).with_context(|| truth_path.display().to_string())?;
    let stats = group_stats(&groups);

    ensure_dir(&ctx.dir)?;
    let mut lines = metrics.to_key_values();
    lines.extend(stats.to_key_values());
    write_lines(
        &ctx.path(a.metrics_out, METRICS),
        Compression::Plain,
        &lines,
    )?;
    eprint!("{}", metrics.to_aligned());
    Ok(())
}

fn cmd_hash(ctx: &Ctx, a: HashArgs) -> Result<()> {
    let corpus = match a.corpus {
        Some(path) => Some(load_corpus(&path, DEFAULT_MAX_RECORD_BYTES)?),
        None => None,
    };
    let records = corpus.as_ref().map(|c| c.records.as_slice());
    let groups = read_alias_map(&ctx.path(a.aliases, ALIASES), records)?;
    ensure_dir(&ctx.dir)?;
    let out = ctx.path(a.out, HASHED);
    write_hashed_alias_map(&groups, &out)?;
    eprintln!(
        "hashed {} alias groups into {}",
        groups.len(),
        out.display()
    );
    Ok(())
}
