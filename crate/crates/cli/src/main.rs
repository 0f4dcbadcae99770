mod config;
mod reference;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lmtk_core::bpe::{train_bpe, BpeConfig, BpeEncoder, MergeTable};
use lmtk_core::corpus::{self, inject_noise, preprocess, restore, DEFAULT_EOT, DEFAULT_SENTINEL, DEFAULT_SHARD_BYTES};
use lmtk_core::encoder::{ids_from_binary, ids_from_text, ids_to_binary, ids_to_text, BINARY_MAGIC};
use lmtk_core::metrics::{self, MetricsConfig};
use lmtk_core::partition::{brute_force_best, build_graph, greedy_split, toy_instance, MAX_BRUTE_FORCE};
use lmtk_core::perf::{counting_scaling, mean_std, measure, throughput_mbs};
use lmtk_core::trainer::{CheckpointPolicy, TrainMode};
use lmtk_core::{
    CountingConfig, Error, LengthMaxEncoder, RawCorpus, SentinelConfig, Shard, Tokenizer, Trainer, TrainerConfig,
    Vocabulary,
};

const DEFAULT_SEEDS: [u64; 5] = [42, 123, 456, 789, 1024];

#[derive(Parser)]
#[command(name = "lmtk", version, about = "Length-weighted tokenizer training, encoding and evaluation")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary by greedy length-weighted selection.
    Train(TrainArgs),
    /// Build a BPE merge table for comparison.
    TrainBpe(TrainBpeArgs),
    /// Encode text into token ids.
    Encode(EncodeArgs),
    /// Decode token ids back into text.
    Decode(DecodeArgs),
    /// Compression and distribution statistics for one tokenizer.
    Stats(StatsArgs),
    /// TPC grid for several tokenizers over several corpora.
    Compare(CompareArgs),
    /// Rank-frequency fit of the token distribution.
    Zipf(StatsArgs),
    /// Solve the prefix-graph partition problem on a small instance.
    Oracle(OracleArgs),
    /// Timing of vocabulary construction, encoding and parallel counting.
    Bench(BenchArgs),
    /// Inject character substitutions, or measure their effect on coverage.
    Noise(NoiseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DocFormat {
    /// Documents separated by the end-of-text marker.
    Eot,
    /// One document per non-empty line.
    Lines,
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file; repeat or separate with commas for several files.
    #[arg(long = "corpus", required = true, value_delimiter = ',', env = "LMTK_CORPUS")]
    corpus: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "eot", env = "LMTK_DOC_FORMAT")]
    doc_format: DocFormat,
    #[arg(long, default_value = DEFAULT_EOT, env = "LMTK_EOT_MARKER")]
    eot_marker: String,
}

#[derive(Args)]
struct SentinelArgs {
    /// Code point that replaces spaces.
    #[arg(long, default_value_t = DEFAULT_SENTINEL, env = "LMTK_SENTINEL")]
    sentinel: char,
    /// Keep tokens inside word boundaries.
    #[arg(long, env = "LMTK_WORD_SEPARATED")]
    word_separated: bool,
}

impl SentinelArgs {
    fn config(&self) -> SentinelConfig {
        SentinelConfig::new(self.sentinel).word_separated(self.word_separated)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    sentinel: SentinelArgs,
    /// Target vocabulary size K, counting specials and the alphabet.
    #[arg(short = 'k', long, env = "LMTK_VOCAB_SIZE")]
    vocab_size: usize,
    /// Longest candidate, in code points.
    #[arg(long, default_value_t = 16, env = "LMTK_L_MAX")]
    l_max: usize,
    /// Candidates kept per scoreboard (M).
    #[arg(long, default_value_t = 50_000, env = "LMTK_SCOREBOARD")]
    scoreboard: usize,
    #[arg(long, default_value_t = 2, env = "LMTK_MIN_FREQ")]
    min_freq: u64,
    #[arg(long, default_value_t = 1, env = "LMTK_WORKERS")]
    workers: usize,
    #[arg(long, value_enum, default_value = "incremental", env = "LMTK_MODE")]
    mode: Mode,
    /// Tokens accepted per round; values above one are approximate.
    #[arg(long, default_value_t = 1, env = "LMTK_BATCH")]
    batch: usize,
    #[arg(long, default_value_t = DEFAULT_SHARD_BYTES, env = "LMTK_SHARD_BYTES")]
    shard_bytes: usize,
    /// Checkpoint file, rewritten periodically during training.
    #[arg(long, env = "LMTK_CHECKPOINT")]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 500, env = "LMTK_CHECKPOINT_EVERY")]
    checkpoint_every: usize,
    /// Continue from a checkpoint written for the same corpus.
    #[arg(long, env = "LMTK_RESUME")]
    resume: Option<PathBuf>,
    #[arg(short, long, env = "LMTK_OUTPUT")]
    output: PathBuf,
    /// Training report; defaults to the output path with `.report.json`.
    #[arg(long, env = "LMTK_REPORT")]
    report: Option<PathBuf>,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Incremental,
    Recount,
}

#[derive(Args)]
struct TrainBpeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    sentinel: SentinelArgs,
    #[arg(short = 'k', long, env = "LMTK_VOCAB_SIZE")]
    vocab_size: usize,
    #[arg(long, default_value_t = 2, env = "LMTK_MIN_FREQ")]
    min_freq: u64,
    #[arg(long, default_value_t = 1, env = "LMTK_WORKERS")]
    workers: usize,
    #[arg(long, default_value_t = DEFAULT_SHARD_BYTES, env = "LMTK_SHARD_BYTES")]
    shard_bytes: usize,
    #[arg(short, long, env = "LMTK_OUTPUT")]
    output: PathBuf,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IdFormat {
    Text,
    Binary,
}

#[derive(Args)]
struct EncodeArgs {
    /// Vocabulary or BPE merge table.
    #[arg(long, env = "LMTK_VOCAB")]
    vocab: PathBuf,
    /// Input text; standard input when absent.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text", env = "LMTK_ID_FORMAT")]
    format: IdFormat,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, env = "LMTK_VOCAB")]
    vocab: PathBuf,
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Id format; detected from the binary magic when absent.
    #[arg(long, value_enum, env = "LMTK_ID_FORMAT")]
    format: Option<IdFormat>,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
struct MetricArgs {
    /// Number of head ranks in the variance statistic.
    #[arg(long, default_value_t = 50)]
    head_n: usize,
    /// Ranks skipped before comparing the tail with a Zipf law.
    #[arg(long, default_value_t = 50)]
    head_skip: usize,
    /// Exponent of the ideal Zipf tail.
    #[arg(long, default_value_t = 1.0)]
    zipf_alpha: f64,
}

impl MetricArgs {
    fn config(&self) -> MetricsConfig {
        MetricsConfig {
            head_n: self.head_n,
            head_skip: self.head_skip,
            zipf_alpha: self.zipf_alpha,
        }
    }
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, env = "LMTK_VOCAB")]
    vocab: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, value_enum, default_value = "table", env = "LMTK_FORMAT")]
    format: ReportFormat,
    /// Also print published reference values.
    #[arg(long)]
    reference: bool,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// `NAME=PATH` or `PATH`; repeat for several tokenizers.
    #[arg(long = "vocab", required = true, value_delimiter = ',')]
    vocabs: Vec<String>,
    /// `NAME=PATH` or `PATH`; each file is evaluated separately.
    #[arg(long = "corpus", required = true, value_delimiter = ',')]
    corpora: Vec<String>,
    #[arg(long, value_enum, default_value = "eot", env = "LMTK_DOC_FORMAT")]
    doc_format: DocFormat,
    #[arg(long, default_value = DEFAULT_EOT, env = "LMTK_EOT_MARKER")]
    eot_marker: String,
    #[command(flatten)]
    metric: MetricArgs,
    /// `csv` prints the TPC grid only.
    #[arg(long, value_enum, default_value = "csv", env = "LMTK_FORMAT")]
    format: ReportFormat,
    /// Also print the published reference grid.
    #[arg(long)]
    reference: bool,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// One sequence per line; the built-in five-sequence instance when absent.
    #[arg(long)]
    sequences: Option<PathBuf>,
    /// Number of blocks.
    #[arg(short = 'k', long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    sentinel: SentinelArgs,
    #[arg(short = 'k', long, default_value_t = 1_000, env = "LMTK_VOCAB_SIZE")]
    vocab_size: usize,
    /// Pool sizes for the counting scaling measurement.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8", env = "LMTK_WORKERS")]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 5, env = "LMTK_RUNS")]
    runs: usize,
    #[arg(long, default_value_t = 10.0, env = "LMTK_WARMUP_SECS")]
    warmup_secs: f64,
    #[arg(long, default_value_t = 16)]
    l_max: usize,
    #[arg(long, default_value_t = 50_000)]
    scoreboard: usize,
    /// Also print the published scaling table to standard error.
    #[arg(long)]
    reference: bool,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-character substitution probability.
    #[arg(long, default_value_t = 0.03, env = "LMTK_NOISE_RATE")]
    rate: f64,
    /// Seeds; the first one is used when writing noisy text.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS, env = "LMTK_SEED")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_SENTINEL, env = "LMTK_SENTINEL")]
    sentinel: char,
    /// Report coverage and OOV on clean and noisy text instead of writing it.
    #[arg(long, env = "LMTK_VOCAB")]
    vocab: Option<PathBuf>,
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(a),
        Command::TrainBpe(a) => cmd_train_bpe(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Stats(a) => cmd_stats(a, false),
        Command::Zipf(a) => cmd_stats(a, true),
        Command::Compare(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Noise(a) => cmd_noise(a),
    }
}

fn read_corpus(path: &Path, format: DocFormat, marker: &str) -> Result<RawCorpus> {
    let r = match format {
        DocFormat::Eot => RawCorpus::read_eot(path, marker),
        DocFormat::Lines => RawCorpus::read_lines(path),
    };
    r.with_context(|| format!("reading corpus {}", path.display()))
}

fn load_corpus(a: &CorpusArgs) -> Result<RawCorpus> {
    let mut docs = Vec::new();
    for p in &a.corpus {
        docs.extend(read_corpus(p, a.doc_format, &a.eot_marker)?.documents);
    }
    let mut raw = RawCorpus::new(docs);
    raw.eot_marker = a.eot_marker.clone();
    Ok(raw)
}

fn load_shards(a: &CorpusArgs, cfg: &SentinelConfig, cap: usize) -> Result<Vec<Shard>> {
    let raw = load_corpus(a)?;
    if raw.documents.is_empty() {
        bail!("corpus is empty");
    }
    Ok(corpus::shard(&raw, cap, cfg)?)
}

fn check_vocab_size(k: usize) -> Result<()> {
    if k == 0 {
        bail!("--vocab-size must be positive");
    }
    Ok(())
}

fn name_k_flag(e: Error) -> anyhow::Error {
    match e {
        Error::InvalidK { k, base } => anyhow!(
            "--vocab-size {k} is too small: the specials and corpus alphabet already take {base} entries"
        ),
        e => e.into(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    check_vocab_size(a.vocab_size)?;
    let sentinel = a.sentinel.config();
    let cfg = TrainerConfig {
        counting: CountingConfig {
            l_max: a.l_max,
            min_freq: a.min_freq,
            ..CountingConfig::default()
        },
        sentinel: sentinel.clone(),
        scoreboard_size: a.scoreboard,
        workers: a.workers,
        mode: match a.mode {
            Mode::Incremental => TrainMode::Incremental,
            Mode::Recount => TrainMode::Recount,
        },
        batch: a.batch,
        checkpoint: CheckpointPolicy {
            path: a.checkpoint.clone(),
            every_iterations: Some(a.checkpoint_every.max(1)),
            every_secs: None,
        },
        ..TrainerConfig::default()
    };
    cfg.validate().context("invalid training options")?;
    let shards = load_shards(&a.corpus, &sentinel, a.shard_bytes)?;
    let mut trainer = match &a.resume {
        Some(p) => Trainer::resume(&shards, &cfg, p).with_context(|| format!("resuming from {}", p.display()))?,
        None => Trainer::new(&shards, a.vocab_size, &cfg).map_err(name_k_flag)?,
    };
    trainer.run()?;
    let (vocab, report) = trainer.finish();
    write_atomic(&a.output, vocab.to_json().as_bytes())?;
    let report_path = a.report.clone().unwrap_or_else(|| a.output.with_extension("report.json"));
    write_atomic(&report_path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    eprintln!(
        "{} tokens ({} learned), AveLength {:.4} -> {:.4}{}",
        vocab.len(),
        vocab.learned().len(),
        report.initial_ave_length(),
        report.ave_lengths().last().copied().unwrap_or(0.0),
        if report.halted_early { ", halted early: no run reaches min-freq" } else { "" }
    );
    Ok(())
}

fn cmd_train_bpe(a: TrainBpeArgs) -> Result<()> {
    check_vocab_size(a.vocab_size)?;
    let sentinel = a.sentinel.config();
    let shards = load_shards(&a.corpus, &sentinel, a.shard_bytes)?;
    let cfg = BpeConfig {
        sentinel,
        min_count: a.min_freq,
        workers: a.workers,
    };
    let table = train_bpe(&shards, a.vocab_size, &cfg).map_err(name_k_flag)?;
    write_atomic(&a.output, table.to_json().as_bytes())?;
    eprintln!("{} merges, {} tokens", table.merges.len(), table.vocab.len());
    Ok(())
}

fn load_tokenizer(path: &Path) -> Result<Box<dyn Tokenizer>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading vocabulary {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing vocabulary {}", path.display()))?;
    if value.get("merges").is_some() {
        Ok(Box::new(BpeEncoder::new(MergeTable::from_json(&text)?)))
    } else {
        Ok(Box::new(LengthMaxEncoder::new(Vocabulary::from_json(&text)?)?))
    }
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>> {
    match path {
        Some(p) => fs::read(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let tok = load_tokenizer(&a.vocab)?;
    let input = String::from_utf8(read_input(a.input.as_deref())?).map_err(|_| Error::InvalidUtf8)?;
    let ids = tok.encode_raw(&input)?;
    let bytes = match a.format {
        IdFormat::Text => ids_to_text(&ids).into_bytes(),
        IdFormat::Binary => ids_to_binary(&ids),
    };
    write_output(a.output.as_deref(), &bytes)
}

fn cmd_decode(a: DecodeArgs) -> Result<()> {
    let tok = load_tokenizer(&a.vocab)?;
    let input = read_input(a.input.as_deref())?;
    let format = a.format.unwrap_or(if input.starts_with(BINARY_MAGIC) {
        IdFormat::Binary
    } else {
        IdFormat::Text
    });
    let ids = match format {
        IdFormat::Binary => ids_from_binary(&input)?,
        IdFormat::Text => ids_from_text(std::str::from_utf8(&input).map_err(|_| Error::InvalidUtf8)?)?,
    };
    write_output(a.output.as_deref(), tok.decode(&ids)?.as_bytes())
}

fn preprocessed_docs(raw: &RawCorpus, cfg: &SentinelConfig) -> Result<Vec<String>> {
    Ok(raw
        .documents
        .iter()
        .map(|d| preprocess(d, cfg))
        .collect::<lmtk_core::Result<_>>()?)
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cmd_stats(a: StatsArgs, zipf_only: bool) -> Result<()> {
    let tok = load_tokenizer(&a.vocab)?;
    let raw = load_corpus(&a.corpus)?;
    let docs = preprocessed_docs(&raw, &tok.sentinel())?;
    let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
    let report = metrics::evaluate(tok.as_ref(), &refs, &a.metric.config())?;
    if zipf_only {
        #[derive(Serialize)]
        struct Zipf {
            alpha: f64,
            r2: f64,
            degenerate: bool,
            head_variance: f64,
            js_divergence: f64,
        }
        let z = Zipf {
            alpha: report.zipf_alpha,
            r2: report.zipf_r2,
            degenerate: report.zipf_degenerate,
            head_variance: report.head_variance,
            js_divergence: report.js_divergence,
        };
        match a.format {
            ReportFormat::Json => print_json(&z)?,
            _ => {
                println!("alpha,R2,degenerate,head_variance,js_divergence");
                println!("{:.4},{:.4},{},{:.3e},{:.4}", z.alpha, z.r2, z.degenerate, z.head_variance, z.js_divergence);
            }
        }
        if a.reference {
            print!("{}", reference::zipf_table());
        }
        return Ok(());
    }
    match a.format {
        ReportFormat::Json => print_json(&report)?,
        _ => {
            let rows = [
                ("tokens", report.token_count.to_string()),
                ("chars", report.char_count.to_string()),
                ("tpc", format!("{:.4}", report.tpc)),
                ("coverage", format!("{:.4}", report.coverage)),
                ("oov_rate", format!("{:.4}", report.oov_rate)),
                ("fallback_rate", format!("{:.4}", report.fallback_rate)),
                ("utilization", format!("{:.4}", report.utilization)),
                ("zipf_alpha", format!("{:.4}", report.zipf_alpha)),
                ("zipf_r2", format!("{:.4}", report.zipf_r2)),
                ("head_variance", format!("{:.3e}", report.head_variance)),
                ("js_divergence", format!("{:.4}", report.js_divergence)),
            ];
            let sep = if matches!(a.format, ReportFormat::Csv) { "," } else { "\t" };
            for (k, v) in rows {
                println!("{k}{sep}{v}");
            }
        }
    }
    if a.reference {
        print!("{}", reference::utilization_table());
    }
    Ok(())
}

fn split_named(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((n, p)) => (n.to_string(), PathBuf::from(p)),
        None => {
            let p = PathBuf::from(spec);
            let name = p.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, p)
        }
    }
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let mut toks = Vec::new();
    for v in &a.vocabs {
        let (name, path) = split_named(v);
        toks.push((name, load_tokenizer(&path)?));
    }
    let sentinel = toks[0].1.sentinel();
    if toks.iter().any(|(_, t)| t.sentinel().sentinel != sentinel.sentinel) {
        bail!("all tokenizers must share one sentinel");
    }
    let mut corpora = Vec::new();
    for c in &a.corpora {
        let (name, path) = split_named(c);
        let raw = read_corpus(&path, a.doc_format, &a.eot_marker)?;
        corpora.push((name, preprocessed_docs(&raw, &sentinel)?));
    }
    let tok_refs: Vec<(&str, &dyn Tokenizer)> = toks.iter().map(|(n, t)| (n.as_str(), t.as_ref())).collect();
    let corpus_refs: Vec<(&str, Vec<&str>)> = corpora
        .iter()
        .map(|(n, d)| (n.as_str(), d.iter().map(String::as_str).collect()))
        .collect();
    let cmp = metrics::compare(&tok_refs, &corpus_refs, &a.metric.config())?;
    match a.format {
        ReportFormat::Csv => print!("{}", cmp.tpc_csv()),
        ReportFormat::Json => println!("{}", cmp.to_json()),
        ReportFormat::Table => print!("{}", cmp.to_table()),
    }
    if a.reference {
        print!("{}", reference::tpc_table());
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let g = match &a.sequences {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            build_graph(&text.lines().filter(|l| !l.is_empty()).collect::<Vec<_>>())
        }
        None => toy_instance(),
    };
    #[derive(Serialize)]
    struct Out {
        sequences: Vec<String>,
        weights: Vec<Vec<usize>>,
        brute_force: Option<(Vec<Vec<usize>>, u64)>,
        greedy: (Vec<Vec<usize>>, u64),
        greedy_deltas: Vec<i64>,
    }
    let brute_force = if g.sequences.len() <= MAX_BRUTE_FORCE {
        let (p, v) = brute_force_best(&g, a.blocks)?;
        Some((p.blocks, v))
    } else {
        None
    };
    let gs = greedy_split(&g, a.blocks)?;
    print_json(&Out {
        sequences: g.sequences.clone(),
        weights: g.weights.clone(),
        brute_force,
        greedy: (gs.partition.blocks, gs.objective),
        greedy_deltas: gs.deltas,
    })
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    check_vocab_size(a.vocab_size)?;
    let sentinel = a.sentinel.config();
    let shards = load_shards(&a.corpus, &sentinel, DEFAULT_SHARD_BYTES)?;
    let bytes: usize = shards.iter().map(|s| s.byte_len).sum();
    let warmup = Duration::from_secs_f64(a.warmup_secs.max(0.0));
    let cfg = TrainerConfig {
        counting: CountingConfig::with_l_max(a.l_max),
        sentinel: sentinel.clone(),
        scoreboard_size: a.scoreboard,
        ..TrainerConfig::default()
    };

    let mut vocab = None;
    let mut failure = None;
    let build = measure(warmup, a.runs, || match lmtk_core::trainer::train(&shards, a.vocab_size, &cfg) {
        Ok((v, _)) => vocab = Some(v),
        Err(e) => failure = Some(e),
    });
    if let Some(e) = failure {
        return Err(name_k_flag(e));
    }
    let enc = LengthMaxEncoder::new(vocab.expect("at least one run"))?;
    let docs: Vec<&str> = shards.iter().flat_map(Shard::documents).collect();
    let encode = measure(warmup, a.runs, || {
        for d in &docs {
            std::hint::black_box(enc.encode(d));
        }
    });
    let mbs: Vec<f64> = encode.samples.iter().map(|&s| throughput_mbs(bytes, s)).collect();
    let (mbs_mean, mbs_std) = mean_std(&mbs);

    let seqs: Vec<_> = shards.iter().map(Shard::sequence).collect();
    if a.reference {
        eprint!("{}", reference::scaling_table());
    }
    let scaling = counting_scaling(&seqs, &cfg.counting, a.scoreboard, cfg.count_budget, &a.workers, warmup, a.runs)?;

    #[derive(Serialize)]
    struct Out {
        corpus_bytes: usize,
        vocab_size: usize,
        build_secs_mean: f64,
        build_secs_std: f64,
        encode_mbs_mean: f64,
        encode_mbs_std: f64,
        counting: Vec<lmtk_core::perf::ScalingPoint>,
        available_cores: usize,
        reference_note: &'static str,
        reference_efficiency_8_cores: f64,
    }
    print_json(&Out {
        corpus_bytes: bytes,
        vocab_size: a.vocab_size,
        build_secs_mean: build.mean_secs,
        build_secs_std: build.std_secs,
        encode_mbs_mean: mbs_mean,
        encode_mbs_std: mbs_std,
        counting: scaling,
        available_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
        reference_note: reference::NOTE,
        reference_efficiency_8_cores: reference::SCALING.iter().find(|r| r.0 == 8).map_or(0.0, |r| r.3),
    })
}

fn cmd_noise(a: NoiseArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.rate) {
        bail!("--rate must be within [0, 1]");
    }
    let raw = String::from_utf8(read_input(a.input.as_deref())?).map_err(|_| Error::InvalidUtf8)?;
    let seeds = if a.seed.is_empty() { DEFAULT_SEEDS.to_vec() } else { a.seed.clone() };
    match &a.vocab {
        None => {
            let cfg = SentinelConfig::new(a.sentinel);
            let noisy = inject_noise(&preprocess(&raw, &cfg)?, a.rate, seeds[0], a.sentinel)?;
            write_output(a.output.as_deref(), restore(&noisy, &cfg).as_bytes())
        }
        Some(v) => {
            let tok = load_tokenizer(v)?;
            let text = preprocess(&raw, &tok.sentinel())?;
            #[derive(Serialize)]
            struct Run {
                seed: u64,
                clean: metrics::Coverage,
                noisy: metrics::Coverage,
            }
            let mut runs = Vec::new();
            for &seed in &seeds {
                let (clean, noisy) = metrics::noise_delta(tok.as_ref(), &text, a.rate, seed)?;
                runs.push(Run { seed, clean, noisy });
            }
            let oov: Vec<f64> = runs.iter().map(|r| r.noisy.oov_rate).collect();
            let (mean, std) = mean_std(&oov);
            #[derive(Serialize)]
            struct Out {
                rate: f64,
                runs: Vec<Run>,
                noisy_oov_mean: f64,
                noisy_oov_std: f64,
            }
            let json = serde_json::to_string_pretty(&Out {
                rate: a.rate,
                runs,
                noisy_oov_mean: mean,
                noisy_oov_std: std,
            })?;
            write_output(a.output.as_deref(), format!("{json}\n").as_bytes())
        }
    }
}
