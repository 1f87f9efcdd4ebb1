use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Open { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("no token occurs at least {min_count} times")]
    NoSurvivingTokens { min_count: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("malformed vector file header: {0}")]
    MalformedHeader(String),

    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: duplicate word '{word}'")]
    DuplicateWord { line: usize, word: String },

    #[error("vector file declares no words")]
    EmptyModel,

    #[error("pair table was built for vocabulary {table}, but the vocabulary checksum is {vocab}")]
    ChecksumMismatch { table: String, vocab: String },

    #[error("{which} matrix is not present in this model")]
    MissingMatrix { which: &'static str },

    #[error("similarity is undefined for a zero vector (word id {0})")]
    ZeroVector(usize),

    #[error("unknown word '{word}'{}", suggestion_suffix(.suggestions))]
    UnknownWord {
        word: String,
        suggestions: Vec<String>,
    },

    #[error("no word occurs in both vector sets")]
    NoCommonWords,

    #[error("need at least {needed} known words, found {found}")]
    TooFewWords { needed: usize, found: usize },

    #[error("non-finite value in {matrix} matrix after epoch {epoch}: row {row} ('{word}'), column {col}")]
    NonFinite {
        matrix: &'static str,
        epoch: usize,
        row: usize,
        word: String,
        col: usize,
    },
}

impl Error {
    /// Whether the error stems from bad input (as opposed to a failure
    /// during computation).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::NonFinite { .. })
    }
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", suggestions.join(", "))
    }
}
