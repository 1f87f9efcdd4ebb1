//! SGD with negative sampling for SG, CBOW, SG-DI and CBOW-DA.

mod params;
mod step;

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    fill_context, for_each_line_in_range, shard_ranges, window_radius, NegativeSamplingTable,
    Subsampler, Tokenizer, DEFAULT_NS_POWER,
};
use crate::error::{Error, Result};
use crate::model::{EmbeddingModel, Mode};
use crate::pairs::PairTable;
use params::RawParams;

pub use step::{
    attention_from_scores, attention_weights, cbow_step, indicator_step, logistic_update, sg_step,
    sigmoid, Sigmoid, StepContext, MAX_EXP,
};

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub min_lr: f32,
    /// Weight of the domain indicator channel relative to the skip-gram
    /// channel.
    pub indicator_weight: f32,
    pub workers: usize,
    pub seed: u64,
    /// Draw the window radius uniformly from `1..=window` per position.
    pub dynamic_window: bool,
    /// Frequent-word subsampling threshold; disabled when `None`.
    pub subsample: Option<f64>,
    pub ns_power: f64,
    pub sigmoid_table: bool,
    pub lowercase: bool,
}

impl TrainConfig {
    pub fn default_lr(mode: Mode) -> f32 {
        if mode.is_cbow() {
            0.05
        } else {
            0.025
        }
    }

    pub fn new(mode: Mode) -> Self {
        let lr = Self::default_lr(mode);
        TrainConfig {
            mode,
            dim: 200,
            window: 5,
            negatives: 10,
            epochs: 5,
            initial_lr: lr,
            min_lr: lr * 1e-4,
            indicator_weight: 1.0,
            workers: 1,
            seed: 1,
            dynamic_window: false,
            subsample: None,
            ns_power: DEFAULT_NS_POWER,
            sigmoid_table: false,
            lowercase: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.dim < 1 {
            return fail("dim must be at least 1".into());
        }
        if self.window < 1 {
            return fail("window must be at least 1".into());
        }
        if self.workers < 1 {
            return fail("workers must be at least 1".into());
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.initial_lr && self.initial_lr.is_finite()) {
            return fail(format!(
                "learning rates must satisfy 0 < min_lr ({}) <= initial_lr ({})",
                self.min_lr, self.initial_lr
            ));
        }
        if !(self.indicator_weight >= 0.0 && self.indicator_weight.is_finite()) {
            return fail(format!("indicator weight must be >= 0, got {}", self.indicator_weight));
        }
        if let Some(t) = self.subsample {
            if t.is_nan() || t <= 0.0 {
                return fail(format!("subsampling threshold must be positive, got {}", t));
            }
        }
        Ok(())
    }

    /// `key<TAB>value` lines describing the effective configuration.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let subsample = self.subsample.map_or("off".to_owned(), |t| t.to_string());
        let rows: [(&str, String); 15] = [
            ("mode", self.mode.to_string()),
            ("dim", self.dim.to_string()),
            ("window", self.window.to_string()),
            ("negatives", self.negatives.to_string()),
            ("epochs", self.epochs.to_string()),
            ("initial_lr", self.initial_lr.to_string()),
            ("min_lr", self.min_lr.to_string()),
            ("indicator_weight", self.indicator_weight.to_string()),
            ("workers", self.workers.to_string()),
            ("seed", self.seed.to_string()),
            ("dynamic_window", self.dynamic_window.to_string()),
            ("subsample", subsample),
            ("ns_power", self.ns_power.to_string()),
            ("sigmoid_table", self.sigmoid_table.to_string()),
            ("lowercase", self.lowercase.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{}\t{}", k, v);
        }
        s
    }
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub tokens: u64,
    pub seconds: f64,
    /// Mean σ over positive (center, context) pairs: a loss proxy.
    pub mean_positive_sigma: f64,
    /// Mean σ(υ·δ) of the indicator channel (SG-DI only).
    pub mean_indicator_sigma: Option<f64>,
}

impl EpochStats {
    pub fn tokens_per_sec(&self) -> f64 {
        if self.seconds > 0.0 {
            self.tokens as f64 / self.seconds
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
}

impl TrainStats {
    pub fn total_tokens(&self) -> u64 {
        self.epochs.iter().map(|e| e.tokens).sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch\ttokens_per_sec\tmean_positive_sigma\tmean_indicator_sigma")?;
        for e in &self.epochs {
            let ind = e
                .mean_indicator_sigma
                .map_or("NA".to_owned(), |s| format!("{:.6}", s));
            writeln!(
                w,
                "{}\t{:.1}\t{:.6}\t{}",
                e.epoch,
                e.tokens_per_sec(),
                e.mean_positive_sigma,
                ind
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Default)]
struct WorkerStats {
    tokens: u64,
    positive_sigma: f64,
    positive_n: u64,
    indicator_sigma: f64,
    indicator_n: u64,
}

struct Shared<'a> {
    params: RawParams<'a>,
    config: &'a TrainConfig,
    tokenizer: Tokenizer,
    vocab: &'a crate::corpus::Vocabulary,
    ns: NegativeSamplingTable,
    subsampler: Option<Subsampler>,
    pairs: Option<&'a PairTable>,
    indicator_on: bool,
    processed: AtomicU64,
    scheduled: u64,
}

impl Shared<'_> {
    fn learning_rate(&self) -> f32 {
        let c = self.config;
        let progress = (self.processed.load(Ordering::Relaxed) as f64 / self.scheduled.max(1) as f64).min(1.0);
        let lr = c.initial_lr as f64 - (c.initial_lr - c.min_lr) as f64 * progress;
        (lr as f32).clamp(c.min_lr, c.initial_lr)
    }

    fn run_shard(&self, path: &Path, range: std::ops::Range<u64>, ctx: &mut StepContext) -> Result<WorkerStats> {
        let mut stats = WorkerStats::default();
        let mut ids = Vec::new();
        let mut context = Vec::with_capacity(2 * self.config.window);
        for_each_line_in_range(path, range, |line| {
            ids.clear();
            self.tokenizer.line_ids(line, self.vocab, &mut ids);
            self.processed.fetch_add(ids.len() as u64, Ordering::Relaxed);
            stats.tokens += ids.len() as u64;
            if let Some(sub) = &self.subsampler {
                sub.apply(&mut ids, &mut ctx.rng);
            }
            ctx.lr = self.learning_rate();
            // SAFETY: ids come from the vocabulary the matrices were built
            // for; concurrent access follows the relaxed-consistency contract.
            unsafe { self.train_sentence(&ids, &mut context, ctx, &mut stats) };
            Ok(())
        })?;
        Ok(stats)
    }

    unsafe fn train_sentence(
        &self,
        ids: &[u32],
        context: &mut Vec<u32>,
        ctx: &mut StepContext,
        stats: &mut WorkerStats,
    ) {
        let config = self.config;
        for t in 0..ids.len() {
            let radius = window_radius(config.window, config.dynamic_window, &mut ctx.rng);
            fill_context(ids, t, radius, context);
            if context.is_empty() {
                continue;
            }
            let center = ids[t];
            match config.mode {
                Mode::Sg | Mode::SgDi => {
                    for &c in context.iter() {
                        let s = step::sg_step_raw(&self.params, ctx, center, c, &self.ns);
                        stats.positive_sigma += s as f64;
                        stats.positive_n += 1;
                        if self.indicator_on {
                            let s = step::indicator_step_raw(
                                &self.params,
                                ctx,
                                center,
                                c,
                                self.pairs.unwrap(),
                                config.indicator_weight,
                            );
                            stats.indicator_sigma += s as f64;
                            stats.indicator_n += 1;
                        }
                    }
                }
                Mode::Cbow | Mode::CbowDa => {
                    let attention = if config.mode == Mode::CbowDa { self.pairs } else { None };
                    let s = step::cbow_step_raw(&self.params, ctx, center, context, &self.ns, attention);
                    stats.positive_sigma += s as f64;
                    stats.positive_n += 1;
                }
            }
        }
    }
}

/// Trains `model` on the corpus at `corpus` for `config.epochs` passes.
///
/// SG-DI and CBOW-DA require a pair table built against the model's
/// vocabulary. With an empty table, SG-DI skips the indicator channel and
/// trains exactly like SG. The learning rate decays linearly from
/// `initial_lr` to `min_lr` over all scheduled tokens. Workers train on
/// disjoint, line-aligned byte ranges of the corpus.
pub fn train(
    model: &mut EmbeddingModel,
    corpus: &Path,
    config: &TrainConfig,
    pairs: Option<&PairTable>,
) -> Result<TrainStats> {
    config.validate()?;
    if model.mode() != config.mode {
        return Err(Error::InvalidArgument(format!(
            "model was initialized for mode {} but training mode is {}",
            model.mode(),
            config.mode
        )));
    }
    let pairs = if config.mode.is_domain_aware() {
        let table = pairs.ok_or_else(|| {
            Error::InvalidArgument(format!("mode {} requires a pair table", config.mode))
        })?;
        table.check_vocab(model.vocab())?;
        Some(table)
    } else {
        if pairs.is_some() {
            log::warn!("mode {} ignores the pair table", config.mode);
        }
        None
    };
    if config.epochs == 0 {
        return Ok(TrainStats::default());
    }

    let vocab = model.vocab().clone();
    let ranges = shard_ranges(corpus, config.workers)?;
    let mut contexts: Vec<StepContext> = (0..config.workers)
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            // Stream 0 initializes the model.
            rng.set_stream(w as u64 + 1);
            let sigmoid = if config.sigmoid_table {
                Sigmoid::table()
            } else {
                Sigmoid::exact()
            };
            StepContext::new(rng, config.initial_lr, config.negatives, sigmoid, config.dim)
        })
        .collect();

    let names = [("input", 0usize), ("output", 1), ("indicator", 2)];
    let mut stats = TrainStats::default();
    let shared = Shared {
        params: RawParams::new(model),
        config,
        tokenizer: Tokenizer::new(config.lowercase),
        vocab: &vocab,
        ns: NegativeSamplingTable::new(&vocab, config.ns_power)?,
        subsampler: config.subsample.map(|t| Subsampler::new(&vocab, t)),
        pairs,
        indicator_on: config.mode == Mode::SgDi && pairs.is_some_and(|p| !p.is_empty()),
        processed: AtomicU64::new(0),
        scheduled: vocab.retained_tokens() * config.epochs as u64,
    };

    for epoch in 0..config.epochs {
        let start = Instant::now();
        let results: Vec<Result<WorkerStats>> = if config.workers == 1 {
            vec![shared.run_shard(corpus, ranges[0].clone(), &mut contexts[0])]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = contexts
                    .iter_mut()
                    .zip(&ranges)
                    .map(|(ctx, range)| {
                        let shared = &shared;
                        let range = range.clone();
                        scope.spawn(move || shared.run_shard(corpus, range, ctx))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            })
        };
        let mut total = WorkerStats::default();
        for r in results {
            let r = r?;
            total.tokens += r.tokens;
            total.positive_sigma += r.positive_sigma;
            total.positive_n += r.positive_n;
            total.indicator_sigma += r.indicator_sigma;
            total.indicator_n += r.indicator_n;
        }
        let seconds = start.elapsed().as_secs_f64();

        // SAFETY: no worker is running; reading through the raw pointers is
        // exclusive here.
        let check = |which: usize| -> Option<(usize, usize)> {
            let p = &shared.params;
            let n = vocab.len();
            (0..n as u32).find_map(|row| {
                let r: &[f32] = unsafe {
                    match which {
                        0 => p.input(row),
                        1 => p.output(row),
                        _ => p.indicator(row),
                    }
                };
                r.iter().position(|v| !v.is_finite()).map(|col| (row as usize, col))
            })
        };
        for (name, which) in names {
            if which == 2 && config.mode != Mode::SgDi {
                continue;
            }
            if let Some((row, col)) = check(which) {
                return Err(Error::NonFinite {
                    matrix: name,
                    epoch,
                    row,
                    word: vocab.word(row as u32).to_owned(),
                    col,
                });
            }
        }

        let mean = |sum: f64, n: u64| if n == 0 { 0.0 } else { sum / n as f64 };
        let e = EpochStats {
            epoch,
            tokens: total.tokens,
            seconds,
            mean_positive_sigma: mean(total.positive_sigma, total.positive_n),
            mean_indicator_sigma: (config.mode == Mode::SgDi)
                .then(|| mean(total.indicator_sigma, total.indicator_n)),
        };
        log::info!(
            "epoch {}: {} tokens, {:.0} tokens/s, mean positive sigma {:.4}",
            epoch,
            e.tokens,
            e.tokens_per_sec(),
            e.mean_positive_sigma
        );
        stats.epochs.push(e);
    }

    Ok(stats)
}
