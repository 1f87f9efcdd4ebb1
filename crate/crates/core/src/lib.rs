//! Domain-aware word embeddings.
//!
//! Skip-gram and CBOW with negative sampling, plus two adaptations driven by
//! a table of word pairs that co-occur in a small target-domain corpus:
//!
//! * **SG-DI** adds a per-word domain indicator vector trained to predict
//!   whether a (center, context) pair co-occurs in the target domain.
//! * **CBOW-DA** weights the context projection by attention scores that mix
//!   source associations with the target co-occurrence factor.
//!
//! The [`eval`] module provides the embedding shift, cluster and PCA
//! analyses used to inspect adapted embeddings.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod pairs;
pub mod trainer;

pub use corpus::{build_ns_table, build_vocab, NegativeSamplingTable, Tokenizer, Vocabulary, WindowExample};
pub use error::{Error, Result};
pub use eval::{Embeddings, PcaProjection, ShiftReport};
pub use model::{EmbeddingModel, Matrix, Mode, WhichMatrix};
pub use pairs::{extract_pairs, DomainFrequencies, PairTable};
pub use trainer::{train, TrainConfig, TrainStats};
