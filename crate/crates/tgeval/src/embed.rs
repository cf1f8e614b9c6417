//! Sentence-embedding ingestion and a built-in deterministic embedder.
//!
//! The built-in embedder maps each token (and optionally each adjacent
//! bigram) to a fixed pseudo-Gaussian vector derived from its FNV-1a hash,
//! then pools per sentence. It is untrained on purpose: it only has to
//! shift its statistics under distributional change so the full pipeline
//! runs without external models. Real evaluations should ingest embeddings
//! from an external encoder via [`load_embeddings`].

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::rng::{fnv1a64, RngSeed, SplitMix64};

/// A matrix of sentence embeddings, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    rows: Vec<f64>, // row-major, len = n * dim
    source_tag: String,
}

impl EmbeddingSet {
    pub fn new(dim: usize, rows: Vec<f64>, source_tag: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dim must be >= 1".into()));
        }
        if !rows.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "embedding data length {} is not a multiple of dim {dim}",
                rows.len()
            )));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite embedding value at row {}",
                pos / dim + 1
            )));
        }
        Ok(EmbeddingSet {
            dim,
            rows,
            source_tag: source_tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.dim)
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }
}

/// Pooling applied over the token/bigram vectors of a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Mean,
    Max,
}

#[derive(Debug, Clone)]
pub struct HashEmbedderConfig {
    pub dim: usize,
    pub pooling: Pooling,
    pub use_bigrams: bool,
    pub seed: RngSeed,
}

impl Default for HashEmbedderConfig {
    fn default() -> Self {
        HashEmbedderConfig {
            dim: 256,
            pooling: Pooling::Mean,
            use_bigrams: true,
            seed: RngSeed(0),
        }
    }
}

impl HashEmbedderConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "hash embedder dim must be >= 2, got {}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Loads the text embedding format: a header `<N> <dim>` followed by N
/// lines of dim space-separated decimals. NaN and infinities are rejected.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "missing `<N> <dim>` header"))?;
    let mut parts = header.split_whitespace();
    let (n, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(n), Some(d), None) => {
            let n: usize = n
                .parse()
                .map_err(|_| Error::format(path, 1, format!("bad row count {n:?}")))?;
            let d: usize = d
                .parse()
                .map_err(|_| Error::format(path, 1, format!("bad dimension {d:?}")))?;
            (n, d)
        }
        _ => return Err(Error::format(path, 1, "header must be `<N> <dim>`")),
    };
    if n == 0 || dim == 0 {
        return Err(Error::format(path, 1, "N and dim must both be >= 1"));
    }

    let mut rows = Vec::with_capacity(n * dim);
    let mut row = 0usize;
    for raw in lines {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        if row > n {
            return Err(Error::format(
                path,
                row + 1,
                format!("more than the declared {n} rows"),
            ));
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::format(path, row + 1, format!("bad number {v:?} in row {row}"))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::format(
                path,
                row + 1,
                format!("row {row} has {} values, expected {dim}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(
                path,
                row + 1,
                format!("non-finite value in row {row}"),
            ));
        }
        rows.extend_from_slice(&values);
    }
    if row != n {
        return Err(Error::format(
            path,
            row + 1,
            format!("declared {n} rows but found {row}"),
        ));
    }
    EmbeddingSet::new(dim, rows, path.display().to_string())
}

/// Writes the text embedding format produced by [`load_embeddings`].
/// Values are printed with the shortest representation that round-trips.
pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", set.len(), set.dim()));
    for row in set.iter_rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// The fixed pseudo-Gaussian vector of one hashed unit. The unit hash
/// seeds a splitmix64 stream expanded through Box-Muller, so the same
/// token always maps to the same vector under the same config.
fn unit_vector(hash: u64, cfg: &HashEmbedderConfig) -> Vec<f64> {
    let mut rng = SplitMix64::new(RngSeed(cfg.seed.0 ^ hash));
    let mut v = Vec::with_capacity(cfg.dim);
    while v.len() < cfg.dim {
        let (a, b) = rng.normal_pair();
        v.push(a);
        if v.len() < cfg.dim {
            v.push(b);
        }
    }
    v
}

fn embed_sentence(sentence: &Sentence, cfg: &HashEmbedderConfig) -> Vec<f64> {
    let tokens = sentence.tokens();
    let mut units: Vec<u64> = tokens.iter().map(|t| fnv1a64(t.as_bytes())).collect();
    if cfg.use_bigrams {
        for pair in tokens.windows(2) {
            let mut bytes = Vec::with_capacity(pair[0].len() + pair[1].len() + 1);
            bytes.extend_from_slice(pair[0].as_bytes());
            bytes.push(0x1F); // unit separator keeps ("ab","c") != ("a","bc")
            bytes.extend_from_slice(pair[1].as_bytes());
            units.push(fnv1a64(&bytes));
        }
    }
    if units.is_empty() {
        return vec![0.0; cfg.dim];
    }
    match cfg.pooling {
        Pooling::Mean => {
            let mut acc = vec![0.0; cfg.dim];
            for &hash in &units {
                for (a, v) in acc.iter_mut().zip(unit_vector(hash, cfg)) {
                    *a += v;
                }
            }
            let scale = 1.0 / units.len() as f64;
            for a in &mut acc {
                *a *= scale;
            }
            acc
        }
        Pooling::Max => {
            let mut acc = vec![f64::NEG_INFINITY; cfg.dim];
            for &hash in &units {
                for (a, v) in acc.iter_mut().zip(unit_vector(hash, cfg)) {
                    if v > *a {
                        *a = v;
                    }
                }
            }
            acc
        }
    }
}

/// Embeds every sentence of the corpus with the hashing embedder.
/// Deterministic: same corpus and config give bit-identical output.
pub fn hash_embed_corpus(corpus: &Corpus, cfg: &HashEmbedderConfig) -> Result<EmbeddingSet> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidInput("cannot embed an empty corpus".into()));
    }
    let rows: Vec<Vec<f64>> = corpus
        .sentences()
        .par_iter()
        .map(|s| embed_sentence(s, cfg))
        .collect();
    let mut flat = Vec::with_capacity(corpus.len() * cfg.dim);
    for row in rows {
        flat.extend_from_slice(&row);
    }
    EmbeddingSet::new(cfg.dim, flat, "hash-embedder")
}
