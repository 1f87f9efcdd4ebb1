//! Command-line pipeline: vocabulary, pair extraction, training and
//! evaluation.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or input
//! errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{build_vocab_from_reader, Tokenizer, Vocabulary, DEFAULT_NS_POWER};
use crate::error::{Error, Result};
use crate::eval::{self, Embeddings, DEFAULT_DICE_THRESHOLD};
use crate::io::{create, open};
use crate::model::{EmbeddingModel, Mode, Precision, WhichMatrix};
use crate::pairs::{extract_pairs, DomainFrequencies, PairTable};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "embda", version, about = "Domain-aware word embeddings")]
pub struct Cli {
    /// Random seed (falls back to EMBDA_SEED).
    #[arg(long, global = true, env = "EMBDA_SEED", default_value_t = 1)]
    pub seed: u64,

    /// Number of training threads.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,

    /// Suppress the configuration echo and progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vocabulary construction.
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Target-domain pair tables.
    #[command(subcommand)]
    Pairs(PairsCommand),
    /// Train embeddings.
    Train(TrainArgs),
    /// Analyses over trained vectors.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Subcommand)]
pub enum VocabCommand {
    /// Count a source corpus into a vocabulary file.
    Build(VocabArgs),
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Minimum number of occurrences for a word to be kept.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_count: u64,
    /// Keep case instead of lowercasing tokens.
    #[arg(long)]
    pub no_lowercase: bool,
}

#[derive(Debug, Subcommand)]
pub enum PairsCommand {
    /// Extract co-occurring word pairs from a target corpus.
    Extract(PairsArgs),
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Co-occurrence radius in tokens.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
    #[arg(long)]
    pub no_lowercase: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sg,
    Cbow,
    #[value(name = "sg-di")]
    SgDi,
    #[value(name = "cbow-da")]
    CbowDa,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Sg => Mode::Sg,
            ModeArg::Cbow => Mode::Cbow,
            ModeArg::SgDi => Mode::SgDi,
            ModeArg::CbowDa => Mode::CbowDa,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Source corpus, one sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Pair table (required for sg-di and cbow-da).
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Output file for the input vectors.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
    #[arg(long, default_value_t = 10)]
    pub negatives: u64,
    #[arg(long, default_value_t = 5)]
    pub epochs: u64,
    /// Initial learning rate [default: 0.025 for sg/sg-di, 0.05 for cbow/cbow-da].
    #[arg(long)]
    pub lr: Option<f32>,
    /// Final learning rate [default: 1e-4 * initial].
    #[arg(long)]
    pub min_lr: Option<f32>,
    /// Weight of the domain indicator channel.
    #[arg(long, default_value_t = 1.0)]
    pub indicator_weight: f32,
    /// Exponent of the negative sampling distribution.
    #[arg(long, default_value_t = DEFAULT_NS_POWER)]
    pub ns_power: f64,
    /// Shrink the window randomly per position.
    #[arg(long)]
    pub dynamic_window: bool,
    /// Frequent-word subsampling threshold (e.g. 1e-4); off by default.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Use a 1000-bin sigmoid lookup table.
    #[arg(long)]
    pub sigmoid_table: bool,
    #[arg(long)]
    pub no_lowercase: bool,
    /// Write vectors with full f32 precision instead of 6 significant digits.
    #[arg(long)]
    pub full_precision: bool,
    /// Also write the output vectors.
    #[arg(long)]
    pub save_output_vecs: Option<PathBuf>,
    /// Also write the domain indicator vectors (sg-di).
    #[arg(long)]
    pub save_indicator: Option<PathBuf>,
    /// Write per-epoch statistics as TSV.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Embedding shift against cross-domain dice frequency.
    Shift(ShiftArgs),
    /// Nearest neighbors of a word.
    Neighbors(NeighborsArgs),
    /// Mean pairwise cosine distance within a word set.
    Cluster(ClusterArgs),
    /// 2-D PCA coordinates of a word set.
    Pca(PcaArgs),
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    #[arg(long)]
    pub source_vecs: PathBuf,
    #[arg(long)]
    pub adapted_vecs: PathBuf,
    #[arg(long)]
    pub source_corpus: PathBuf,
    #[arg(long)]
    pub target_corpus: PathBuf,
    /// Dice threshold for the above/below summary.
    #[arg(long, default_value_t = DEFAULT_DICE_THRESHOLD)]
    pub threshold: f64,
    /// Per-word TSV destination [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Binned summary destination [default: stdout, after the rows].
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub no_lowercase: bool,
}

#[derive(Debug, Args)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub vecs: PathBuf,
    #[arg(long)]
    pub word: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub vecs: PathBuf,
    /// Comma-separated word list.
    #[arg(long, value_delimiter = ',', default_value = "spielberg,director,film,movie")]
    pub words: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub vecs: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "spielberg,director,film,movie")]
    pub words: Vec<String>,
    /// Destination [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();

    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Vocab(VocabCommand::Build(a)) => cmd_vocab(cli, a),
        Command::Pairs(PairsCommand::Extract(a)) => cmd_pairs(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Eval(e) => cmd_eval(cli, e),
    }
}

fn echo(cli: &Cli, command: &str, rows: &[(&str, String)]) {
    if cli.quiet {
        return;
    }
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "command\t{}", command);
    let _ = writeln!(err, "seed\t{}", cli.seed);
    let _ = writeln!(err, "threads\t{}", cli.threads);
    for (k, v) in rows {
        let _ = writeln!(err, "{}\t{}", k, v);
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn writer_for(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(open(path)?))
}

/// `vocab build`
pub fn cmd_vocab(cli: &Cli, a: &VocabArgs) -> Result<()> {
    echo(
        cli,
        "vocab build",
        &[
            ("input", path_str(&a.input)),
            ("output", path_str(&a.output)),
            ("min_count", a.min_count.to_string()),
            ("lowercase", (!a.no_lowercase).to_string()),
        ],
    );
    let vocab = build_vocab_from_reader(reader(&a.input)?, Tokenizer::new(!a.no_lowercase), a.min_count)?;
    vocab.save(&a.output)?;
    log::info!(
        "{} words, {} tokens ({} retained)",
        vocab.len(),
        vocab.total_tokens(),
        vocab.retained_tokens()
    );
    Ok(())
}

/// `pairs extract`
pub fn cmd_pairs(cli: &Cli, a: &PairsArgs) -> Result<()> {
    echo(
        cli,
        "pairs extract",
        &[
            ("input", path_str(&a.input)),
            ("vocab", path_str(&a.vocab)),
            ("output", path_str(&a.output)),
            ("window", a.window.to_string()),
            ("lowercase", (!a.no_lowercase).to_string()),
        ],
    );
    let vocab = Vocabulary::load(&a.vocab)?;
    let (table, coverage) = extract_pairs(
        reader(&a.input)?,
        &vocab,
        Tokenizer::new(!a.no_lowercase),
        a.window as usize,
    )?;
    table.save(&vocab, &a.output)?;
    if !cli.quiet {
        eprintln!("target_tokens\t{}", coverage.target_tokens);
        eprintln!("in_vocab_fraction\t{:.6}", coverage.in_vocab_fraction());
        eprintln!("pairs\t{}", coverage.pairs);
    }
    Ok(())
}

/// Resolves training flags into a [`TrainConfig`].
pub fn train_config(cli: &Cli, a: &TrainArgs) -> TrainConfig {
    let mode = Mode::from(a.mode);
    let initial_lr = a.lr.unwrap_or_else(|| TrainConfig::default_lr(mode));
    TrainConfig {
        mode,
        dim: a.dim as usize,
        window: a.window as usize,
        negatives: a.negatives as usize,
        epochs: a.epochs as usize,
        initial_lr,
        min_lr: a.min_lr.unwrap_or(initial_lr * 1e-4),
        indicator_weight: a.indicator_weight,
        workers: cli.threads as usize,
        seed: cli.seed,
        dynamic_window: a.dynamic_window,
        subsample: a.subsample,
        ns_power: a.ns_power,
        sigmoid_table: a.sigmoid_table,
        lowercase: !a.no_lowercase,
    }
}

/// `train`
pub fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let config = train_config(cli, a);
    config.validate()?;
    if config.mode.is_domain_aware() && a.pairs.is_none() {
        return Err(Error::InvalidArgument(format!(
            "mode {} requires --pairs",
            config.mode
        )));
    }
    if !config.mode.is_domain_aware() && a.pairs.is_some() {
        log::warn!("mode {} does not use --pairs; ignoring it", config.mode);
    }
    if a.save_indicator.is_some() && config.mode != Mode::SgDi {
        return Err(Error::InvalidArgument(
            "--save-indicator requires --mode sg-di".into(),
        ));
    }
    if !cli.quiet {
        let mut err = io::stderr().lock();
        let _ = writeln!(err, "command\ttrain");
        let _ = writeln!(err, "corpus\t{}", path_str(&a.corpus));
        let _ = writeln!(err, "vocab\t{}", path_str(&a.vocab));
        let pairs = a.pairs.as_deref().map_or("none".into(), path_str);
        let _ = writeln!(err, "pairs\t{}", pairs);
        let _ = write!(err, "{}", config.to_tsv());
    }

    let vocab = Arc::new(Vocabulary::load(&a.vocab)?);
    let pairs = match (&a.pairs, config.mode.is_domain_aware()) {
        (Some(p), true) => Some(PairTable::load(p, &vocab)?),
        _ => None,
    };
    let mut model = EmbeddingModel::new(vocab, config.dim, config.mode, config.seed)?;
    let stats = train(&mut model, &a.corpus, &config, pairs.as_ref())?;

    let precision = if a.full_precision { Precision::Full } else { Precision::Significant6 };
    model.save_vectors(WhichMatrix::Input, &a.output, precision)?;
    if let Some(p) = &a.save_output_vecs {
        model.save_vectors(WhichMatrix::Output, p, precision)?;
    }
    if let Some(p) = &a.save_indicator {
        model.save_vectors(WhichMatrix::Indicator, p, precision)?;
    }
    if let Some(p) = &a.stats {
        stats.write_tsv(BufWriter::new(create(p)?))?;
    }
    if !cli.quiet {
        stats.write_tsv(io::stderr().lock())?;
    }
    Ok(())
}

/// `eval shift|neighbors|cluster|pca`
pub fn cmd_eval(cli: &Cli, e: &EvalCommand) -> Result<()> {
    match e {
        EvalCommand::Shift(a) => {
            echo(
                cli,
                "eval shift",
                &[
                    ("source_vecs", path_str(&a.source_vecs)),
                    ("adapted_vecs", path_str(&a.adapted_vecs)),
                    ("source_corpus", path_str(&a.source_corpus)),
                    ("target_corpus", path_str(&a.target_corpus)),
                    ("threshold", a.threshold.to_string()),
                ],
            );
            let tokenizer = Tokenizer::new(!a.no_lowercase);
            let source = Embeddings::load(&a.source_vecs)?;
            let adapted = Embeddings::load(&a.adapted_vecs)?;
            let vocab = build_vocab_from_reader(reader(&a.source_corpus)?, tokenizer, 1)?;
            let freqs = DomainFrequencies::new(&vocab, reader(&a.target_corpus)?, tokenizer)?;
            let report = eval::shift_report(&source, &adapted, &freqs, &vocab)?;
            let mut out = writer_for(a.output.as_deref())?;
            report.write_tsv(&mut out)?;
            match &a.summary {
                Some(p) => report.write_summary_tsv(BufWriter::new(create(p)?), a.threshold)?,
                None => report.write_summary_tsv(&mut out, a.threshold)?,
            }
            out.flush()?;
        }
        EvalCommand::Neighbors(a) => {
            echo(
                cli,
                "eval neighbors",
                &[("vecs", path_str(&a.vecs)), ("word", a.word.clone()), ("k", a.k.to_string())],
            );
            let emb = Embeddings::load(&a.vecs)?;
            let mut out = writer_for(None)?;
            for (word, cos) in eval::nearest_neighbors(&emb, &a.word, a.k)? {
                writeln!(out, "{}\t{:.6}", word, cos)?;
            }
            out.flush()?;
        }
        EvalCommand::Cluster(a) => {
            echo(
                cli,
                "eval cluster",
                &[("vecs", path_str(&a.vecs)), ("words", a.words.join(","))],
            );
            let emb = Embeddings::load(&a.vecs)?;
            let t = eval::cluster_tightness(&emb, &a.words)?;
            let mut out = writer_for(None)?;
            writeln!(out, "{:.8}", t)?;
            out.flush()?;
        }
        EvalCommand::Pca(a) => {
            echo(
                cli,
                "eval pca",
                &[("vecs", path_str(&a.vecs)), ("words", a.words.join(","))],
            );
            let emb = Embeddings::load(&a.vecs)?;
            let p = eval::pca_project(&emb, &a.words)?;
            p.write_tsv(writer_for(a.output.as_deref())?)?;
        }
    }
    Ok(())
}
