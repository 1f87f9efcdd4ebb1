//! Python bindings: `import pyembda`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use embda::corpus::build_vocab_from_reader;
use embda::model::Precision;
use embda::trainer::attention_from_scores;
use pyo3::exceptions::{PyKeyError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: embda::Error) -> PyErr {
    match e {
        embda::Error::Open { .. } | embda::Error::Io(_) => PyOSError::new_err(e.to_string()),
        e if e.is_input_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn open(path: &Path) -> PyResult<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(embda::io::open(path).map_err(err)?))
}

#[pyclass(name = "Vocabulary", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyVocabulary(Arc<embda::Vocabulary>);

#[pymethods]
impl PyVocabulary {
    /// Counts the tokens of a corpus file and keeps words seen at least
    /// `min_count` times.
    #[staticmethod]
    #[pyo3(signature = (path, min_count = 5, lowercase = true))]
    fn build(path: PathBuf, min_count: u64, lowercase: bool) -> PyResult<Self> {
        let vocab = build_vocab_from_reader(open(&path)?, embda::Tokenizer::new(lowercase), min_count).map_err(err)?;
        Ok(PyVocabulary(Arc::new(vocab)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyVocabulary(Arc::new(embda::Vocabulary::load(path).map_err(err)?)))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __contains__(&self, word: &str) -> bool {
        self.0.id(word).is_some()
    }

    fn words(&self) -> Vec<String> {
        self.0.words().to_vec()
    }

    fn count(&self, word: &str) -> u64 {
        self.0.id(word).map_or(0, |id| self.0.count(id))
    }

    fn id(&self, word: &str) -> Option<u32> {
        self.0.id(word)
    }

    #[getter]
    fn total_tokens(&self) -> u64 {
        self.0.total_tokens()
    }

    #[getter]
    fn checksum(&self) -> String {
        self.0.checksum()
    }

    fn __repr__(&self) -> String {
        format!("Vocabulary(words={}, checksum={})", self.0.len(), self.0.checksum())
    }
}

#[pyclass(name = "PairTable", frozen)]
struct PyPairTable {
    table: embda::PairTable,
    vocab: Arc<embda::Vocabulary>,
}

#[pymethods]
impl PyPairTable {
    /// Collects in-vocabulary word pairs co-occurring within `window` in a
    /// target corpus file.
    #[staticmethod]
    #[pyo3(signature = (path, vocab, window = 5, lowercase = true))]
    fn extract(path: PathBuf, vocab: &PyVocabulary, window: usize, lowercase: bool) -> PyResult<Self> {
        let (table, _) =
            embda::extract_pairs(open(&path)?, &vocab.0, embda::Tokenizer::new(lowercase), window).map_err(err)?;
        Ok(PyPairTable { table, vocab: vocab.0.clone() })
    }

    #[staticmethod]
    fn load(path: PathBuf, vocab: &PyVocabulary) -> PyResult<Self> {
        let table = embda::PairTable::load(path, &vocab.0).map_err(err)?;
        Ok(PyPairTable { table, vocab: vocab.0.clone() })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.table.save(&self.vocab, path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.table.len()
    }

    fn contains(&self, a: &str, b: &str) -> bool {
        match (self.vocab.id(a), self.vocab.id(b)) {
            (Some(a), Some(b)) => self.table.contains(a, b),
            _ => false,
        }
    }

    fn pairs(&self) -> Vec<(String, String)> {
        self.table
            .pairs()
            .map(|(a, b)| (self.vocab.word(a).to_owned(), self.vocab.word(b).to_owned()))
            .collect()
    }
}

#[pyclass(name = "Model", frozen)]
struct PyModel(embda::EmbeddingModel);

#[pymethods]
impl PyModel {
    #[getter]
    fn mode(&self) -> &'static str {
        self.0.mode().as_str()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Input vector of `word`.
    fn vector(&self, word: &str) -> PyResult<Vec<f32>> {
        let id = self
            .0
            .vocab()
            .id(word)
            .ok_or_else(|| PyKeyError::new_err(word.to_owned()))?;
        Ok(self.0.input().row(id as usize).to_vec())
    }

    fn cosine(&self, a: &str, b: &str) -> PyResult<f64> {
        let vocab = self.0.vocab();
        let id = |w: &str| vocab.id(w).ok_or_else(|| PyKeyError::new_err(w.to_owned()));
        self.0.cosine(id(a)?, id(b)?).map_err(err)
    }

    /// Writes one matrix (`input`, `output` or `indicator`) as a text
    /// vector file.
    #[pyo3(signature = (path, which = "input", full_precision = false))]
    fn save(&self, path: PathBuf, which: &str, full_precision: bool) -> PyResult<()> {
        let which = match which {
            "input" => embda::WhichMatrix::Input,
            "output" => embda::WhichMatrix::Output,
            "indicator" => embda::WhichMatrix::Indicator,
            other => return Err(PyValueError::new_err(format!("unknown matrix '{other}'"))),
        };
        let precision = if full_precision { Precision::Full } else { Precision::Significant6 };
        self.0.save_vectors(which, path, precision).map_err(err)
    }

    /// Input vectors as an `Embeddings` object for evaluation.
    fn embeddings(&self) -> PyResult<PyEmbeddings> {
        let emb = embda::Embeddings::new(self.0.vocab().words().to_vec(), self.0.input().clone()).map_err(err)?;
        Ok(PyEmbeddings(emb))
    }
}

/// Trains a model on a corpus file and returns it.
#[pyfunction]
#[pyo3(signature = (
    mode, corpus, vocab, pairs = None, *, dim = 200, window = 5, negatives = 10, epochs = 5,
    lr = None, indicator_weight = 1.0, seed = 1, threads = 1, dynamic_window = false, subsample = None,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    mode: &str,
    corpus: PathBuf,
    vocab: &PyVocabulary,
    pairs: Option<&PyPairTable>,
    dim: usize,
    window: usize,
    negatives: usize,
    epochs: usize,
    lr: Option<f32>,
    indicator_weight: f32,
    seed: u64,
    threads: usize,
    dynamic_window: bool,
    subsample: Option<f64>,
) -> PyResult<PyModel> {
    let mode: embda::Mode = mode.parse().map_err(err)?;
    let mut config = embda::TrainConfig::new(mode);
    config.dim = dim;
    config.window = window;
    config.negatives = negatives;
    config.epochs = epochs;
    if let Some(lr) = lr {
        config.initial_lr = lr;
        config.min_lr = 1e-4 * lr;
    }
    config.indicator_weight = indicator_weight;
    config.seed = seed;
    config.workers = threads;
    config.dynamic_window = dynamic_window;
    config.subsample = subsample;
    let mut model = embda::EmbeddingModel::new(vocab.0.clone(), dim, mode, seed).map_err(err)?;
    let table = pairs.map(|p| &p.table);
    py.detach(|| embda::train(&mut model, &corpus, &config, table))
        .map_err(err)?;
    Ok(PyModel(model))
}

type Projection = (Vec<(String, f64, f64)>, (f64, f64));

#[pyclass(name = "Embeddings", frozen)]
struct PyEmbeddings(embda::Embeddings);

#[pymethods]
impl PyEmbeddings {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyEmbeddings(embda::Embeddings::load(path).map_err(err)?))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn words(&self) -> Vec<String> {
        self.0.words().to_vec()
    }

    fn vector(&self, word: &str) -> PyResult<Vec<f32>> {
        self.0
            .vector(word)
            .map(<[f32]>::to_vec)
            .ok_or_else(|| PyKeyError::new_err(word.to_owned()))
    }

    /// The `k` most similar words with their cosine similarities.
    #[pyo3(signature = (word, k = 10))]
    fn nearest(&self, word: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        embda::eval::nearest_neighbors(&self.0, word, k).map_err(err)
    }

    /// Mean pairwise cosine distance among `words`.
    fn tightness(&self, words: Vec<String>) -> PyResult<f64> {
        embda::eval::cluster_tightness(&self.0, &words).map_err(err)
    }

    /// 2-D PCA: `([(word, x, y)], (var1, var2))`.
    fn pca(&self, words: Vec<String>) -> PyResult<Projection> {
        let p = embda::eval::pca_project(&self.0, &words).map_err(err)?;
        Ok((p.rows, (p.explained_variance[0], p.explained_variance[1])))
    }

    /// Per-word `(word, dice, shift)` of `adapted` relative to `self`.
    #[pyo3(signature = (adapted, source_corpus, target_corpus, lowercase = true))]
    fn shift(
        &self,
        adapted: &PyEmbeddings,
        source_corpus: PathBuf,
        target_corpus: PathBuf,
        lowercase: bool,
    ) -> PyResult<Vec<(String, f64, f64)>> {
        let tok = embda::Tokenizer::new(lowercase);
        let vocab = build_vocab_from_reader(open(&source_corpus)?, tok, 1).map_err(err)?;
        let freqs = embda::DomainFrequencies::new(&vocab, open(&target_corpus)?, tok).map_err(err)?;
        let report = embda::eval::shift_report(&self.0, &adapted.0, &freqs, &vocab).map_err(err)?;
        Ok(report.rows.into_iter().map(|r| (r.word, r.dice, r.shift)).collect())
    }
}

/// Logistic function clamped to `[-6, 6]`.
#[pyfunction]
fn sigmoid(x: f32) -> f32 {
    embda::trainer::sigmoid(x)
}

/// Attention weights from association scores and 0/1 link flags.
#[pyfunction]
fn attention(scores: Vec<f32>, links: Vec<bool>) -> PyResult<Vec<f64>> {
    if scores.len() != links.len() {
        return Err(PyValueError::new_err("scores and links differ in length"));
    }
    let factors: Vec<u8> = links.into_iter().map(u8::from).collect();
    let mut out = Vec::new();
    attention_from_scores(&scores, &factors, &mut out);
    Ok(out)
}

#[pymodule]
fn pyembda(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PyPairTable>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyEmbeddings>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(sigmoid, m)?)?;
    m.add_function(wrap_pyfunction!(attention, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
