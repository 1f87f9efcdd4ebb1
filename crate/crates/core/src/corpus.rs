//! Corpus streaming, vocabulary construction, negative-sampling tables and
//! context windows.
//!
//! Sentences are newline-delimited and tokens are whitespace-delimited.
//! Out-of-vocabulary tokens are removed from a sentence before any window
//! is formed, so two in-vocabulary words separated only by unknown tokens
//! are adjacent.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::open;

/// Default exponent applied to counts in the negative-sampling distribution.
pub const DEFAULT_NS_POWER: f64 = 0.75;

/// Whitespace tokenizer with optional lowercasing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tokenizer {
    pub lowercase: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer { lowercase: true }
    }
}

impl Tokenizer {
    pub fn new(lowercase: bool) -> Self {
        Tokenizer { lowercase }
    }

    /// Calls `f` for every token of `line`.
    pub fn for_each_token<F>(&self, line: &str, mut f: F)
    where
        F: FnMut(&str),
    {
        if self.lowercase && line.bytes().any(|b| b.is_ascii_uppercase() || !b.is_ascii()) {
            line.to_lowercase().split_whitespace().for_each(&mut f);
        } else {
            line.split_whitespace().for_each(f);
        }
    }

    /// Tokenizes a line into owned strings.
    pub fn tokens(&self, line: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        self.for_each_token(line, |t| tokens.push(t.to_owned()));
        tokens
    }

    /// Appends the vocabulary ids of the in-vocabulary tokens of `line` to
    /// `out`, dropping unknown tokens. Returns the number of raw tokens.
    pub fn line_ids(&self, line: &str, vocab: &Vocabulary, out: &mut Vec<u32>) -> usize {
        let mut n = 0;
        self.for_each_token(line, |t| {
            n += 1;
            if let Some(id) = vocab.id(t) {
                out.push(id);
            }
        });
        n
    }
}

/// Word to id mapping with source-corpus counts.
///
/// Ids are dense and assigned by descending count, ties broken by first
/// occurrence in the corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Constructs a vocabulary from words in id order.
    pub fn from_parts(words: Vec<String>, counts: Vec<u64>, total_tokens: u64) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::InvalidArgument(format!(
                "{} words but {} counts",
                words.len(),
                counts.len()
            )));
        }
        if words.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("vocabulary too large".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate word '{}'", w)));
            }
        }
        let sum: u64 = counts.iter().sum();
        if total_tokens < sum {
            return Err(Error::InvalidArgument(format!(
                "total token count {} is smaller than the sum of counts {}",
                total_tokens, sum
            )));
        }
        Ok(Vocabulary {
            words,
            counts,
            total_tokens,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Number of raw tokens in the corpus the vocabulary was built from,
    /// including dropped rare tokens.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Number of in-vocabulary tokens in the corpus.
    pub fn retained_tokens(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Hex checksum over words, counts and the token total.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.total_tokens.to_le_bytes());
        for (w, c) in self.words.iter().zip(&self.counts) {
            hasher.update((w.len() as u64).to_le_bytes());
            hasher.update(w.as_bytes());
            hasher.update(c.to_le_bytes());
        }
        hasher.finalize()[..8]
            .iter()
            .map(|b| format!("{:02x}", b))
            .collect()
    }

    /// Writes the TSV vocabulary format.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#total_tokens\t{}", self.total_tokens)?;
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(w, "{}\t{}", word, count)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = crate::io::create(path.as_ref())?;
        self.write(std::io::BufWriter::new(file))
    }

    /// Reads the TSV vocabulary format. `origin` names the source in errors.
    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_owned(),
            line,
            message,
        };

        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(parse_err(1, "missing #total_tokens header".into())),
        };
        let total_tokens = header
            .strip_prefix("#total_tokens\t")
            .and_then(|n| n.trim().parse::<u64>().ok())
            .ok_or_else(|| parse_err(1, format!("expected '#total_tokens<TAB>N', found '{}'", header)))?;

        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(lineno, "expected 'word<TAB>count'".into()))?;
            let count = count
                .parse::<u64>()
                .map_err(|e| parse_err(lineno, format!("bad count '{}': {}", count, e)))?;
            words.push(word.to_owned());
            counts.push(count);
        }

        Vocabulary::from_parts(words, counts, total_tokens)
            .map_err(|e| parse_err(0, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read(BufReader::new(open(path)?), &path.display().to_string())
    }
}

/// Builds a vocabulary from a token stream, keeping tokens that occur at
/// least `min_count` times.
pub fn build_vocab<I, S>(tokens: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counter = TokenCounter::default();
    for t in tokens {
        counter.add(t.as_ref());
    }
    counter.finish(min_count)
}

/// Builds a vocabulary from a newline-delimited text corpus.
pub fn build_vocab_from_reader<R: BufRead>(
    reader: R,
    tokenizer: Tokenizer,
    min_count: u64,
) -> Result<Vocabulary> {
    let mut counter = TokenCounter::default();
    for line in reader.lines() {
        tokenizer.for_each_token(&line?, |t| counter.add(t));
    }
    counter.finish(min_count)
}

#[derive(Default)]
struct TokenCounter {
    // token -> (count, first occurrence rank)
    counts: HashMap<String, (u64, usize)>,
    total: u64,
}

impl TokenCounter {
    fn add(&mut self, token: &str) {
        self.total += 1;
        if let Some(entry) = self.counts.get_mut(token) {
            entry.0 += 1;
        } else {
            let rank = self.counts.len();
            self.counts.insert(token.to_owned(), (1, rank));
        }
    }

    fn finish(self, min_count: u64) -> Result<Vocabulary> {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be at least 1".into()));
        }
        if self.total == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut kept: Vec<(String, u64, usize)> = self
            .counts
            .into_iter()
            .filter(|(_, (c, _))| *c >= min_count)
            .map(|(w, (c, r))| (w, c, r))
            .collect();
        if kept.is_empty() {
            return Err(Error::NoSurvivingTokens { min_count });
        }
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let (words, counts) = kept.into_iter().map(|(w, c, _)| (w, c)).unzip();
        Vocabulary::from_parts(words, counts, self.total)
    }
}

/// Cumulative distribution for drawing negative samples proportionally to
/// `count^power`.
#[derive(Clone, Debug)]
pub struct NegativeSamplingTable {
    cumulative: Vec<f64>,
    power: f64,
}

impl NegativeSamplingTable {
    pub fn new(vocab: &Vocabulary, power: f64) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::InvalidArgument("empty vocabulary".into()));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "negative sampling power must be positive, got {}",
                power
            )));
        }
        if vocab.counts().contains(&0) {
            return Err(Error::InvalidArgument(
                "negative sampling requires positive counts".into(),
            ));
        }
        let mut acc = 0.0;
        let cumulative = vocab
            .counts()
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(power);
                acc
            })
            .collect();
        Ok(NegativeSamplingTable { cumulative, power })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Normalization mass.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Probability of drawing word `id`.
    pub fn probability(&self, id: u32) -> f64 {
        let i = id as usize;
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - lo) / self.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.random::<f64>() * self.total();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as u32
    }
}

/// Same as [`NegativeSamplingTable::new`].
pub fn build_ns_table(vocab: &Vocabulary, power: f64) -> Result<NegativeSamplingTable> {
    NegativeSamplingTable::new(vocab, power)
}

/// A center word with its context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowExample {
    pub center: u32,
    pub context: Vec<u32>,
}

/// Writes the context of position `t` within radius `radius` into `buf`,
/// in sentence order.
pub fn fill_context(sentence: &[u32], t: usize, radius: usize, buf: &mut Vec<u32>) {
    buf.clear();
    let lo = t.saturating_sub(radius);
    let hi = (t + radius + 1).min(sentence.len());
    buf.extend_from_slice(&sentence[lo..t]);
    buf.extend_from_slice(&sentence[t + 1..hi]);
}

/// Draws the effective window radius for one position.
#[inline]
pub fn window_radius<R: Rng + ?Sized>(window: usize, dynamic: bool, rng: &mut R) -> usize {
    if dynamic {
        rng.random_range(1..=window)
    } else {
        window
    }
}

/// Window examples of a single sentence of in-vocabulary ids.
pub fn sentence_windows<R: Rng + ?Sized>(
    sentence: &[u32],
    window: usize,
    dynamic: bool,
    rng: &mut R,
) -> Vec<WindowExample> {
    let mut out = Vec::with_capacity(sentence.len());
    let mut buf = Vec::new();
    for t in 0..sentence.len() {
        let radius = window_radius(window, dynamic, rng);
        fill_context(sentence, t, radius, &mut buf);
        if !buf.is_empty() {
            out.push(WindowExample {
                center: sentence[t],
                context: buf.clone(),
            });
        }
    }
    out
}

/// Iterator over the window examples of a newline-delimited corpus.
pub struct Windows<'a, B, R> {
    lines: std::io::Lines<B>,
    vocab: &'a Vocabulary,
    tokenizer: Tokenizer,
    window: usize,
    dynamic: bool,
    rng: R,
    pending: std::vec::IntoIter<WindowExample>,
    ids: Vec<u32>,
}

impl<B: BufRead, R: Rng> Iterator for Windows<'_, B, R> {
    type Item = Result<WindowExample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(ex) = self.pending.next() {
                return Some(Ok(ex));
            }
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.ids.clear();
            self.tokenizer.line_ids(&line, self.vocab, &mut self.ids);
            self.pending =
                sentence_windows(&self.ids, self.window, self.dynamic, &mut self.rng).into_iter();
        }
    }
}

/// Streams `(center, context)` examples from a corpus.
pub fn windows<B: BufRead, R: Rng>(
    corpus: B,
    vocab: &Vocabulary,
    tokenizer: Tokenizer,
    window: usize,
    rng: R,
    dynamic: bool,
) -> Result<Windows<'_, B, R>> {
    if window < 1 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    Ok(Windows {
        lines: corpus.lines(),
        vocab,
        tokenizer,
        window,
        dynamic,
        rng,
        pending: Vec::new().into_iter(),
        ids: Vec::new(),
    })
}

/// Frequent-word subsampling with word2vec's keep probability
/// `(sqrt(f / (t * N)) + 1) * (t * N) / f`.
#[derive(Clone, Debug)]
pub struct Subsampler {
    keep: Vec<f32>,
}

impl Subsampler {
    pub fn new(vocab: &Vocabulary, threshold: f64) -> Self {
        let scaled = threshold * vocab.retained_tokens() as f64;
        let keep = vocab
            .counts()
            .iter()
            .map(|&c| {
                let f = c as f64;
                (((f / scaled).sqrt() + 1.0) * scaled / f).min(1.0) as f32
            })
            .collect();
        Subsampler { keep }
    }

    pub fn keep_probability(&self, id: u32) -> f32 {
        self.keep[id as usize]
    }

    /// Removes ids in place according to their keep probability.
    pub fn apply<R: Rng + ?Sized>(&self, ids: &mut Vec<u32>, rng: &mut R) {
        ids.retain(|&id| {
            let p = self.keep[id as usize];
            p >= 1.0 || rng.random::<f32>() < p
        });
    }
}

/// Splits a file into `n` contiguous byte ranges aligned to line starts.
/// Ranges may be empty when the file has fewer lines than shards.
pub fn shard_ranges(path: &Path, n: usize) -> Result<Vec<Range<u64>>> {
    let n = n.max(1);
    let mut file = open(path)?;
    let len = file.metadata()?.len();
    let mut starts = vec![0u64];
    for i in 1..n {
        let guess = len * i as u64 / n as u64;
        let prev = *starts.last().unwrap();
        let start = if guess <= prev {
            prev
        } else {
            next_line_start(&mut file, guess - 1, len)?
        };
        starts.push(start);
    }
    starts.push(len);
    Ok(starts.windows(2).map(|w| w[0]..w[1]).collect())
}

// Offset just past the first newline at or after `from`.
fn next_line_start(file: &mut File, from: u64, len: u64) -> Result<u64> {
    file.seek(SeekFrom::Start(from))?;
    let mut reader = BufReader::new(file);
    let mut buf = Vec::new();
    let n = reader.read_until(b'\n', &mut buf)?;
    Ok((from + n as u64).min(len))
}

/// Reads the lines of one byte range of a file.
pub fn for_each_line_in_range<F>(path: &Path, range: Range<u64>, mut f: F) -> Result<()>
where
    F: FnMut(&str) -> Result<()>,
{
    let mut file = open(path)?;
    file.seek(SeekFrom::Start(range.start))?;
    let mut reader = BufReader::with_capacity(1 << 16, file.take(range.end - range.start));
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        f(&line)?;
    }
}
