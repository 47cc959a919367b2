//! Syntax-aware multi-sense word embeddings with compositional sentence
//! encoders.
//!
//! The toolkit jointly trains word representations and a sentence
//! encoder (tree-driven composition or an LSTM) against a
//! corruption-based hinge objective: every sentence must out-score both
//! word-substituted and word-shuffled variants of itself. Each word
//! carries several sense vectors routed by context clustering, and a
//! siamese network with dynamic sense disambiguation refines the result
//! for paraphrase detection.
//!
//! The `sams` binary exposes training, evaluation, nearest-neighbor
//! inspection and a gradient self-check; see the crate README.

pub mod checkpoint;
pub mod composition;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod objective;
pub mod optim;
pub mod rng;
pub mod selfcheck;
pub mod senses;
pub mod siamese;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{Encoder, EncoderKind, Model};
pub use tensor::Tensor;
