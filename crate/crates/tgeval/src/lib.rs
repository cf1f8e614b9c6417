//! Evaluation toolkit for unsupervised text generation.
//!
//! Measures sample quality and diversity with corpus-level BLEU and
//! self-BLEU, unique n-gram counts, the Frechet distance between Gaussian
//! fits of sentence embeddings, and language-model scores backed by a
//! Kneser-Ney n-gram model. Controlled deterioration (word dropout, word
//! swapping, topic-based mode dropping) validates that the metrics react
//! to known damage, and a random-search protocol tunes a
//! system-under-evaluation, replicates its best configuration and reports
//! mean +/- std per metric.
//!
//! Every randomized operation takes an explicit 64-bit seed and produces
//! bit-identical results across platforms.

pub mod cli;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod frechet;
pub mod lm;
pub mod metrics;
pub mod ngram;
pub mod perturb;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RngSeed;
