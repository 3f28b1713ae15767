//! Document embeddings learned by a weight-tied Siamese perceptron.
//!
//! The crate covers the whole pipeline: corpus ingestion and splits,
//! conventional representations (TFIDF, LSA, LDA, word-vector averages),
//! relevance-pair generation, Siamese training with hand-written
//! backpropagation, classifier evaluation and t-SNE projection.

pub mod classify;
pub mod corpus;
pub mod error;
pub mod features;
pub mod linalg;
pub mod pairs;
pub mod pipeline;
pub mod siamese;
pub mod stopwords;
pub mod viz;

pub use error::{Error, Result};
