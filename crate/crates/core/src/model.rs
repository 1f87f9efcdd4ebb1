//! Parameter matrices, initialization and the word2vec text vector format.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::io::{create, open};

/// Training objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Skip-gram with negative sampling.
    Sg,
    /// Continuous bag-of-words with negative sampling.
    Cbow,
    /// Skip-gram with a domain indicator channel.
    SgDi,
    /// CBOW with domain attention over the context.
    CbowDa,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Sg, Mode::Cbow, Mode::SgDi, Mode::CbowDa];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sg => "sg",
            Mode::Cbow => "cbow",
            Mode::SgDi => "sg-di",
            Mode::CbowDa => "cbow-da",
        }
    }

    /// Whether the mode consumes a pair table.
    pub fn is_domain_aware(self) -> bool {
        matches!(self, Mode::SgDi | Mode::CbowDa)
    }

    pub fn is_cbow(self) -> bool {
        matches!(self, Mode::Cbow | Mode::CbowDa)
    }

    /// The plain counterpart of a domain-aware mode.
    pub fn base(self) -> Mode {
        match self {
            Mode::Sg | Mode::SgDi => Mode::Sg,
            Mode::Cbow | Mode::CbowDa => Mode::Cbow,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mode '{}'", s)))
    }
}

/// Dense row-major `f32` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Position of the first NaN or infinite entry as `(row, col)`.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols, i % self.cols))
    }
}

/// Selects one of the model's matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhichMatrix {
    Input,
    Output,
    Indicator,
}

impl WhichMatrix {
    pub fn as_str(self) -> &'static str {
        match self {
            WhichMatrix::Input => "input",
            WhichMatrix::Output => "output",
            WhichMatrix::Indicator => "indicator",
        }
    }
}

/// Input, output and (SG-DI only) indicator embeddings over a vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    vocab: Arc<Vocabulary>,
    mode: Mode,
    pub(crate) input: Matrix,
    pub(crate) output: Matrix,
    pub(crate) indicator: Option<Matrix>,
}

impl EmbeddingModel {
    /// Input rows are drawn i.i.d. from `U(-0.5/dim, 0.5/dim)`; output and
    /// indicator rows start at zero.
    pub fn new(vocab: Arc<Vocabulary>, dim: usize, mode: Mode, seed: u64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArgument("dim must be at least 1".into()));
        }
        let n = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / dim as f32;
        let data = (0..n * dim)
            .map(|_| (rng.random::<f32>() - 0.5) * scale)
            .collect();
        Ok(EmbeddingModel {
            vocab,
            mode,
            input: Matrix { rows: n, cols: dim, data },
            output: Matrix::zeros(n, dim),
            indicator: (mode == Mode::SgDi).then(|| Matrix::zeros(n, dim)),
        })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.input.cols
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn input_mut(&mut self) -> &mut Matrix {
        &mut self.input
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut Matrix {
        &mut self.output
    }

    pub fn indicator(&self) -> Option<&Matrix> {
        self.indicator.as_ref()
    }

    pub fn indicator_mut(&mut self) -> Option<&mut Matrix> {
        self.indicator.as_mut()
    }

    pub fn matrix(&self, which: WhichMatrix) -> Option<&Matrix> {
        match which {
            WhichMatrix::Input => Some(&self.input),
            WhichMatrix::Output => Some(&self.output),
            WhichMatrix::Indicator => self.indicator.as_ref(),
        }
    }

    /// Cosine similarity of two input vectors.
    pub fn cosine(&self, u: u32, w: u32) -> Result<f64> {
        cosine_rows(self.input.row(u as usize), self.input.row(w as usize))
            .ok_or_else(|| {
                let zero = if norm(self.input.row(u as usize)) == 0.0 { u } else { w };
                Error::ZeroVector(zero as usize)
            })
    }

    /// Writes one matrix in the text vector format.
    pub fn save_vectors(&self, which: WhichMatrix, path: impl AsRef<Path>, precision: Precision) -> Result<()> {
        let matrix = self.matrix(which).ok_or(Error::MissingMatrix {
            which: which.as_str(),
        })?;
        let file = std::io::BufWriter::new(create(path.as_ref())?);
        write_vectors(file, self.vocab.words(), matrix, precision)
    }
}

/// Same as [`EmbeddingModel::new`].
pub fn init_model(vocab: Arc<Vocabulary>, dim: usize, mode: Mode, seed: u64) -> Result<EmbeddingModel> {
    EmbeddingModel::new(vocab, dim, mode, seed)
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

/// Cosine of two vectors in `f64`; `None` when either is zero.
pub fn cosine_rows(a: &[f32], b: &[f32]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Rendering of vector components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    /// Six significant digits in scientific notation.
    #[default]
    Significant6,
    /// Shortest representation that parses back to the identical `f32`.
    Full,
}

impl Precision {
    /// Largest relative error introduced by rendering.
    pub fn relative_tolerance(self) -> f32 {
        match self {
            Precision::Significant6 => 5e-6,
            Precision::Full => 0.0,
        }
    }
}

/// Writes `<rows> <dim>` followed by one `word v1 ... vdim` line per row.
pub fn write_vectors<W: Write>(mut w: W, words: &[String], matrix: &Matrix, precision: Precision) -> Result<()> {
    if words.len() != matrix.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} words for {} rows",
            words.len(),
            matrix.rows()
        )));
    }
    writeln!(w, "{} {}", matrix.rows(), matrix.cols())?;
    for (i, word) in words.iter().enumerate() {
        w.write_all(word.as_bytes())?;
        for &v in matrix.row(i) {
            match precision {
                Precision::Significant6 => write!(w, " {:.5e}", v)?,
                Precision::Full => write!(w, " {}", v)?,
            }
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the text vector format.
pub fn read_vectors<R: BufRead>(reader: R) -> Result<(Vec<String>, Matrix)> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::MalformedHeader("file is empty".into())),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, dim) = match fields[..] {
        [r, d] => match (r.parse::<usize>(), d.parse::<usize>()) {
            (Ok(r), Ok(d)) => (r, d),
            _ => return Err(Error::MalformedHeader(header.clone())),
        },
        _ => return Err(Error::MalformedHeader(header.clone())),
    };
    if rows == 0 {
        return Err(Error::EmptyModel);
    }
    if dim == 0 {
        return Err(Error::MalformedHeader(header.clone()));
    }

    let mut words = Vec::with_capacity(rows);
    let mut seen = std::collections::HashSet::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == rows {
            return Err(Error::Parse {
                path: String::new(),
                line: lineno,
                message: format!("more than the declared {} rows", rows),
            });
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap();
        let start = data.len();
        for part in parts {
            let v = part.parse::<f32>().map_err(|e| Error::Parse {
                path: String::new(),
                line: lineno,
                message: format!("bad value '{}': {}", part, e),
            })?;
            data.push(v);
        }
        let found = data.len() - start;
        if found != dim {
            return Err(Error::DimensionMismatch {
                line: lineno,
                expected: dim,
                found,
            });
        }
        if !seen.insert(word.to_owned()) {
            return Err(Error::DuplicateWord {
                line: lineno,
                word: word.to_owned(),
            });
        }
        words.push(word.to_owned());
    }
    if words.len() != rows {
        return Err(Error::Parse {
            path: String::new(),
            line: 0,
            message: format!("header declares {} rows, found {}", rows, words.len()),
        });
    }
    Ok((words, Matrix { rows, cols: dim, data }))
}

/// Loads a vector file.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<(Vec<String>, Matrix)> {
    let path = path.as_ref();
    read_vectors(BufReader::new(open(path)?)).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        },
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn vocab(n: usize) -> Arc<Vocabulary> {
        let words: Vec<String> = (0..n).map(|i| format!("w{}", i)).collect();
        Arc::new(Vocabulary::from_parts(words, vec![1; n], n as u64).unwrap())
    }

    #[test]
    fn init_ranges_and_zeros() {
        let m = EmbeddingModel::new(vocab(1000), 200, Mode::Sg, 1).unwrap();
        assert!(m.input().as_slice().iter().all(|v| v.abs() <= 0.0025));
        assert!(m.input().as_slice().iter().any(|&v| v != 0.0));
        assert!(m.output().as_slice().iter().all(|&v| v == 0.0));
        assert!(m.indicator().is_none());

        let di = EmbeddingModel::new(vocab(10), 4, Mode::SgDi, 1).unwrap();
        assert!(di.indicator().unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(di.indicator().unwrap().rows(), 10);
    }

    #[test]
    fn init_is_deterministic() {
        let a = EmbeddingModel::new(vocab(50), 8, Mode::Cbow, 9).unwrap();
        let b = EmbeddingModel::new(vocab(50), 8, Mode::Cbow, 9).unwrap();
        let c = EmbeddingModel::new(vocab(50), 8, Mode::Cbow, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.input(), c.input());
        assert!(EmbeddingModel::new(vocab(5), 0, Mode::Sg, 0).is_err());
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("skipgram".parse::<Mode>().is_err());
    }

    fn model_with_rows(rows: &[[f32; 2]]) -> EmbeddingModel {
        let mut m = EmbeddingModel::new(vocab(rows.len()), 2, Mode::Sg, 0).unwrap();
        for (i, r) in rows.iter().enumerate() {
            m.input_mut().row_mut(i).copy_from_slice(r);
        }
        m
    }

    #[test]
    fn cosine_examples() {
        let m = model_with_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 3.0], [1.0, 1.0], [0.0, 0.0]]);
        assert!((m.cosine(0, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.cosine(0, 2).unwrap(), 0.0);
        assert!((m.cosine(0, 3).unwrap() - 0.5f64.sqrt()).abs() < 1e-7);
        assert!(matches!(m.cosine(0, 4), Err(Error::ZeroVector(4))));
    }

    #[test]
    fn vectors_round_trip() {
        let m = EmbeddingModel::new(vocab(20), 7, Mode::Sg, 3).unwrap();
        for precision in [Precision::Significant6, Precision::Full] {
            let mut buf = Vec::new();
            write_vectors(&mut buf, m.vocab().words(), m.input(), precision).unwrap();
            assert!(String::from_utf8_lossy(&buf).starts_with("20 7\n"));
            let (words, back) = read_vectors(&buf[..]).unwrap();
            assert_eq!(words, m.vocab().words());
            let tol = precision.relative_tolerance();
            for (a, b) in m.input().as_slice().iter().zip(back.as_slice()) {
                assert!((a - b).abs() <= tol * a.abs(), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn vector_file_errors() {
        assert!(matches!(
            read_vectors("2 3\na 1 2 3 4\nb 1 2 3\n".as_bytes()),
            Err(Error::DimensionMismatch { line: 2, expected: 3, found: 4 })
        ));
        assert!(matches!(read_vectors("0 200\n".as_bytes()), Err(Error::EmptyModel)));
        assert!(matches!(read_vectors("2\n".as_bytes()), Err(Error::MalformedHeader(_))));
        assert!(matches!(read_vectors("x y\n".as_bytes()), Err(Error::MalformedHeader(_))));
        assert!(matches!(read_vectors("".as_bytes()), Err(Error::MalformedHeader(_))));
        assert!(matches!(
            read_vectors("2 1\na 1\na 2\n".as_bytes()),
            Err(Error::DuplicateWord { line: 3, .. })
        ));
        assert!(read_vectors("2 1\na 1\n".as_bytes()).is_err());
        assert!(read_vectors("1 1\na one\n".as_bytes()).is_err());
    }

    #[test]
    fn missing_indicator_cannot_be_saved() {
        let v = Arc::new(build_vocab("a b".split_whitespace(), 1).unwrap());
        let m = EmbeddingModel::new(v, 3, Mode::Sg, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = m
            .save_vectors(WhichMatrix::Indicator, dir.path().join("x"), Precision::Full)
            .unwrap_err();
        assert!(matches!(err, Error::MissingMatrix { which: "indicator" }));
    }
}
