//! Target-domain co-occurrence pairs and cross-domain frequency statistics.
//!
//! A [`PairTable`] is the binary relation "these two source-vocabulary
//! words co-occur within a window somewhere in the target corpus". It is
//! the label of the domain-indicator channel and the domain factor of the
//! attention weights.

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::{Tokenizer, Vocabulary};
use crate::error::{Error, Result};
use crate::io::{create, open};

/// Symmetric set of in-vocabulary word pairs, stored as sorted adjacency
/// lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairTable {
    // offsets[id]..offsets[id + 1] indexes the sorted neighbors of id.
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    n_pairs: usize,
    window: usize,
    vocab_checksum: String,
}

/// Coverage of the target corpus by the source vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Coverage {
    pub target_tokens: u64,
    pub in_vocab_tokens: u64,
    pub pairs: usize,
}

impl Coverage {
    /// Fraction of target tokens that are in the source vocabulary.
    pub fn in_vocab_fraction(&self) -> f64 {
        if self.target_tokens == 0 {
            0.0
        } else {
            self.in_vocab_tokens as f64 / self.target_tokens as f64
        }
    }
}

impl PairTable {
    /// Builds a table from canonical or non-canonical id pairs. Self-pairs
    /// are dropped.
    pub fn from_pairs<I>(vocab: &Vocabulary, window: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let n = vocab.len();
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidArgument(format!(
                    "pair ({}, {}) out of range for vocabulary of size {}",
                    a, b, n
                )));
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        Ok(Self::from_canonical(n, window, vocab.checksum(), &set))
    }

    fn from_canonical(
        n: usize,
        window: usize,
        vocab_checksum: String,
        set: &BTreeSet<(u32, u32)>,
    ) -> Self {
        let mut degree = vec![0usize; n + 1];
        for &(a, b) in set {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for d in &degree[..n] {
            offsets.push(acc);
            acc += d;
        }
        offsets.push(acc);

        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; acc];
        for &(a, b) in set {
            neighbors[fill[a as usize]] = b;
            fill[a as usize] += 1;
            neighbors[fill[b as usize]] = a;
            fill[b as usize] += 1;
        }
        for id in 0..n {
            neighbors[offsets[id]..offsets[id + 1]].sort_unstable();
        }

        PairTable {
            offsets,
            neighbors,
            n_pairs: set.len(),
            window,
            vocab_checksum,
        }
    }

    /// An empty table bound to `vocab`.
    pub fn empty(vocab: &Vocabulary, window: usize) -> Self {
        Self::from_canonical(vocab.len(), window, vocab.checksum(), &BTreeSet::new())
    }

    /// Number of unordered pairs.
    pub fn len(&self) -> usize {
        self.n_pairs
    }

    pub fn is_empty(&self) -> bool {
        self.n_pairs == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn vocab_size(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn vocab_checksum(&self) -> &str {
        &self.vocab_checksum
    }

    /// Fails unless the table was built against `vocab`.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let checksum = vocab.checksum();
        if checksum != self.vocab_checksum || vocab.len() != self.vocab_size() {
            return Err(Error::ChecksumMismatch {
                table: self.vocab_checksum.clone(),
                vocab: checksum,
            });
        }
        Ok(())
    }

    /// Sorted partners of `id`.
    pub fn neighbors(&self, id: u32) -> &[u32] {
        let id = id as usize;
        &self.neighbors[self.offsets[id]..self.offsets[id + 1]]
    }

    /// Whether the unordered pair `{u, w}` co-occurs in the target domain.
    #[inline]
    pub fn contains(&self, u: u32, w: u32) -> bool {
        let (nu, nw) = (self.neighbors(u), self.neighbors(w));
        if nu.len() <= nw.len() {
            nu.binary_search(&w).is_ok()
        } else {
            nw.binary_search(&u).is_ok()
        }
    }

    /// The binary label of a pair: 1 if present, else 0.
    #[inline]
    pub fn lookup(&self, u: u32, w: u32) -> u8 {
        self.contains(u, w) as u8
    }

    /// Canonical `(min, max)` pairs in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.vocab_size() as u32).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .filter(move |&&b| b > a)
                .map(move |&b| (a, b))
        })
    }

    /// Ids that take part in at least one pair.
    pub fn paired_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.vocab_size() as u32).filter(move |&id| !self.neighbors(id).is_empty())
    }

    /// Writes the TSV pair format: `#` header lines, then one lexicographically
    /// ordered `word_a<TAB>word_b` per line, sorted.
    pub fn write<W: Write>(&self, vocab: &Vocabulary, mut w: W) -> Result<()> {
        self.check_vocab(vocab)?;
        let mut lines: Vec<(&str, &str)> = self
            .pairs()
            .map(|(a, b)| {
                let (a, b) = (vocab.word(a), vocab.word(b));
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        lines.sort_unstable();
        writeln!(w, "#window\t{}", self.window)?;
        writeln!(w, "#vocab_checksum\t{}", self.vocab_checksum)?;
        writeln!(w, "#pairs\t{}", self.n_pairs)?;
        for (a, b) in lines {
            writeln!(w, "{}\t{}", a, b)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        self.write(vocab, std::io::BufWriter::new(create(path.as_ref())?))
    }

    /// Reads a pair file and binds it to `vocab`, failing on a checksum
    /// mismatch, unknown words, duplicates or self-pairs.
    pub fn read<R: BufRead>(reader: R, vocab: &Vocabulary, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_owned(),
            line,
            message,
        };

        let mut window = None;
        let mut checksum = None;
        let mut set = BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if let Some(header) = line.strip_prefix('#') {
                let (key, value) = header.split_once('\t').unwrap_or((header, ""));
                match key {
                    "window" => {
                        window = Some(value.parse::<usize>().map_err(|e| {
                            parse_err(lineno, format!("bad window '{}': {}", value, e))
                        })?)
                    }
                    "vocab_checksum" => checksum = Some(value.to_owned()),
                    _ => {}
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(lineno, "expected 'word_a<TAB>word_b'".into()))?;
            if a > b {
                return Err(parse_err(lineno, format!("pair '{}', '{}' is not canonically ordered", a, b)));
            }
            let id = |w: &str| {
                vocab
                    .id(w)
                    .ok_or_else(|| parse_err(lineno, format!("word '{}' is not in the vocabulary", w)))
            };
            let (ia, ib) = (id(a)?, id(b)?);
            if ia == ib {
                return Err(parse_err(lineno, format!("self-pair '{}'", a)));
            }
            if !set.insert((ia.min(ib), ia.max(ib))) {
                return Err(parse_err(lineno, format!("duplicate pair '{}', '{}'", a, b)));
            }
        }

        let checksum =
            checksum.ok_or_else(|| parse_err(0, "missing #vocab_checksum header".into()))?;
        let window = window.ok_or_else(|| parse_err(0, "missing #window header".into()))?;
        let table = Self::from_canonical(vocab.len(), window, checksum, &set);
        table.check_vocab(vocab)?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        Self::read(BufReader::new(open(path)?), vocab, &path.display().to_string())
    }
}

/// Extracts every unordered in-vocabulary pair that co-occurs within
/// distance `window` on a line of the target corpus.
///
/// Out-of-vocabulary tokens are removed before windowing, exactly as in
/// training. An empty corpus yields an empty table and a warning.
pub fn extract_pairs<R: BufRead>(
    target: R,
    vocab: &Vocabulary,
    tokenizer: Tokenizer,
    window: usize,
) -> Result<(PairTable, Coverage)> {
    if window < 1 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let mut coverage = Coverage::default();
    let mut set = HashSet::new();
    let mut ids = Vec::new();
    for line in target.lines() {
        let line = line?;
        ids.clear();
        coverage.target_tokens += tokenizer.line_ids(&line, vocab, &mut ids) as u64;
        coverage.in_vocab_tokens += ids.len() as u64;
        for (t, &a) in ids.iter().enumerate() {
            for &b in &ids[t + 1..(t + 1 + window).min(ids.len())] {
                if a != b {
                    set.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    if coverage.target_tokens == 0 {
        log::warn!("target corpus is empty; the pair table is empty");
    }
    let set: BTreeSet<_> = set.into_iter().collect();
    coverage.pairs = set.len();
    let table = PairTable::from_canonical(vocab.len(), window, vocab.checksum(), &set);
    Ok((table, coverage))
}

/// Corpus-relative word frequencies in the source and target domains,
/// indexed by vocabulary id.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainFrequencies {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

impl DomainFrequencies {
    /// Source frequencies come from the vocabulary counts over its token
    /// total; target frequencies are counted from `target`.
    pub fn new<R: BufRead>(vocab: &Vocabulary, target: R, tokenizer: Tokenizer) -> Result<Self> {
        let source = relative(vocab.counts(), vocab.total_tokens());
        let (counts, total) = count_ids(target, vocab, tokenizer)?;
        Ok(DomainFrequencies {
            source,
            target: relative(&counts, total),
        })
    }

    /// Counts both corpora against `vocab`.
    pub fn from_corpora<R1: BufRead, R2: BufRead>(
        vocab: &Vocabulary,
        source: R1,
        target: R2,
        tokenizer: Tokenizer,
    ) -> Result<Self> {
        let (sc, st) = count_ids(source, vocab, tokenizer)?;
        let (tc, tt) = count_ids(target, vocab, tokenizer)?;
        Ok(DomainFrequencies {
            source: relative(&sc, st),
            target: relative(&tc, tt),
        })
    }

    pub fn dice(&self, id: u32) -> f64 {
        dice(self.source[id as usize], self.target[id as usize])
    }
}

/// Sørensen-Dice coefficient of a word's relative frequencies in two
/// domains: `2 fs ft / (fs + ft)`, zero when both are zero.
pub fn dice(fs: f64, ft: f64) -> f64 {
    let sum = fs + ft;
    if sum <= 0.0 {
        0.0
    } else {
        2.0 * fs * ft / sum
    }
}

/// Dice coefficient for word `id`.
pub fn dice_coefficient(freqs: &DomainFrequencies, id: u32) -> f64 {
    freqs.dice(id)
}

fn count_ids<R: BufRead>(reader: R, vocab: &Vocabulary, tokenizer: Tokenizer) -> Result<(Vec<u64>, u64)> {
    let mut counts = vec![0u64; vocab.len()];
    let mut total = 0;
    let mut ids = Vec::new();
    for line in reader.lines() {
        ids.clear();
        total += tokenizer.line_ids(&line?, vocab, &mut ids) as u64;
        for &id in &ids {
            counts[id as usize] += 1;
        }
    }
    Ok((counts, total))
}

fn relative(counts: &[u64], total: u64) -> Vec<f64> {
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn vocab(words: &str) -> Vocabulary {
        build_vocab(words.split_whitespace(), 1).unwrap()
    }

    fn extract(text: &str, v: &Vocabulary, c: usize) -> Vec<(String, String)> {
        let (table, _) = extract_pairs(text.as_bytes(), v, Tokenizer::default(), c).unwrap();
        table
            .pairs()
            .map(|(a, b)| (v.word(a).to_owned(), v.word(b).to_owned()))
            .collect()
    }

    fn p(a: &str, b: &str) -> (String, String) {
        (a.into(), b.into())
    }

    #[test]
    fn extraction_examples() {
        let v = vocab("a b c");
        assert_eq!(extract("a b c\n", &v, 5), vec![p("a", "b"), p("a", "c"), p("b", "c")]);
        assert!(extract("a a\n", &v, 5).is_empty());
        assert_eq!(extract("a q b\n", &v, 1), vec![p("a", "b")]);
    }

    #[test]
    fn lines_are_boundaries() {
        let v = vocab("a b c");
        assert_eq!(extract("a\nb\nc b\n", &v, 5), vec![p("b", "c")]);
    }

    #[test]
    fn lookup_is_symmetric() {
        let v = vocab("a b c");
        let t = PairTable::from_pairs(&v, 5, [(1, 0)]).unwrap();
        assert_eq!(t.lookup(0, 1), 1);
        assert_eq!(t.lookup(1, 0), 1);
        assert_eq!(t.lookup(0, 2), 0);
        assert_eq!(t.lookup(0, 0), 0);
        let e = PairTable::empty(&v, 5);
        assert!((0..3).all(|a| (0..3).all(|b| e.lookup(a, b) == 0)));
    }

    #[test]
    fn empty_target_gives_empty_table() {
        let v = vocab("a b");
        let (t, cov) = extract_pairs("".as_bytes(), &v, Tokenizer::default(), 5).unwrap();
        assert!(t.is_empty());
        assert_eq!(cov.target_tokens, 0);
        assert_eq!(cov.in_vocab_fraction(), 0.0);
    }

    #[test]
    fn coverage_counts_oov() {
        let v = vocab("a b");
        let (_, cov) = extract_pairs("a x b y\n".as_bytes(), &v, Tokenizer::default(), 5).unwrap();
        assert_eq!(cov.target_tokens, 4);
        assert_eq!(cov.in_vocab_tokens, 2);
        assert_eq!(cov.pairs, 1);
        assert_eq!(cov.in_vocab_fraction(), 0.5);
    }

    #[test]
    fn file_round_trip_and_binding() {
        let v = vocab("zeta alpha mid");
        let (t, _) = extract_pairs("zeta alpha mid\n".as_bytes(), &v, Tokenizer::default(), 2).unwrap();
        let mut buf = Vec::new();
        t.write(&v, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["alpha\tmid", "alpha\tzeta", "mid\tzeta"]);
        assert!(text.contains(&format!("#vocab_checksum\t{}", v.checksum())));

        let back = PairTable::read(&buf[..], &v, "mem").unwrap();
        assert_eq!(back, t);

        let other = vocab("zeta alpha mid mid");
        assert!(matches!(
            PairTable::read(&buf[..], &other, "mem"),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn malformed_pair_files() {
        let v = vocab("a b");
        let head = format!("#window\t5\n#vocab_checksum\t{}\n", v.checksum());
        for body in ["b\ta\n", "a\ta\n", "a\tb\na\tb\n", "a\tq\n", "a b\n"] {
            let text = format!("{}{}", head, body);
            assert!(PairTable::read(text.as_bytes(), &v, "mem").is_err(), "{:?}", body);
        }
        assert!(PairTable::read("a\tb\n".as_bytes(), &v, "mem").is_err());
    }

    #[test]
    fn dice_values() {
        assert!((dice(0.01, 0.01) - 0.01).abs() < 1e-15);
        assert!((dice(0.02, 0.01) - 0.0004 / 0.03).abs() < 1e-15);
        assert_eq!(dice(0.05, 0.0), 0.0);
        assert_eq!(dice(0.0, 0.0), 0.0);
    }

    #[test]
    fn domain_frequencies() {
        let v = build_vocab("a a b c".split_whitespace(), 2).unwrap();
        let f = DomainFrequencies::new(&v, "a z z z\n".as_bytes(), Tokenizer::default()).unwrap();
        assert_eq!(f.source, vec![0.5]);
        assert_eq!(f.target, vec![0.25]);
        assert!((dice_coefficient(&f, 0) - 2.0 * 0.5 * 0.25 / 0.75).abs() < 1e-15);
    }
}
