//! Corpus data model: tokenized sentences, optional topic labels, file I/O,
//! deterministic splitting and topic filtering.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, RngSeed, SplitMix64};

/// One tokenized sentence. Tokens never contain whitespace; order is
/// significant. A sentence may be empty (e.g. after heavy word dropout).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    /// Builds a sentence from pre-split tokens, rejecting tokens that
    /// contain whitespace.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if let Some(bad) = tokens.iter().find(|t| t.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidInput(format!(
                "token {bad:?} contains whitespace"
            )));
        }
        Ok(Sentence { tokens })
    }

    pub(crate) fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        Sentence { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Joins tokens with single spaces.
    pub fn detokenize(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Splits a line on runs of Unicode whitespace. No lowercasing, no
/// punctuation stripping; upstream preprocessors own normalization.
pub fn tokenize(line: &str) -> Sentence {
    Sentence {
        tokens: line.split_whitespace().map(str::to_owned).collect(),
    }
}

/// Corpus file formats understood by [`load_corpus`] and [`save_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One sentence per line.
    Lines,
    /// `topic<TAB>sentence` per line.
    TopicTsv,
}

/// An ordered collection of sentences, optionally topic-labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    topics: Option<Vec<String>>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Corpus {
            sentences,
            topics: None,
        }
    }

    pub fn with_topics(sentences: Vec<Sentence>, topics: Vec<String>) -> Result<Self> {
        if sentences.len() != topics.len() {
            return Err(Error::InvalidInput(format!(
                "{} sentences but {} topic labels",
                sentences.len(),
                topics.len()
            )));
        }
        Ok(Corpus {
            sentences,
            topics: Some(topics),
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn topics(&self) -> Option<&[String]> {
        self.topics.as_deref()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Total token count across all sentences.
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// The set of distinct topic labels, sorted.
    pub fn distinct_topics(&self) -> Option<Vec<&str>> {
        self.topics.as_ref().map(|ts| {
            let set: BTreeSet<&str> = ts.iter().map(String::as_str).collect();
            set.into_iter().collect()
        })
    }

    /// Selects sentences by index, carrying topic labels along.
    /// Indices may repeat (sampling with replacement).
    pub(crate) fn select(&self, indices: &[usize]) -> Corpus {
        Corpus {
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            topics: self
                .topics
                .as_ref()
                .map(|ts| indices.iter().map(|&i| ts[i].clone()).collect()),
        }
    }
}

/// Loads a corpus from a UTF-8 file. Accepts LF or CRLF line endings and
/// skips fully blank lines.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, format, path)
}

fn parse_corpus(text: &str, format: CorpusFormat, path: &Path) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut topics = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        match format {
            CorpusFormat::Lines => sentences.push(tokenize(line)),
            CorpusFormat::TopicTsv => {
                let (topic, rest) = line.split_once('\t').ok_or_else(|| {
                    Error::format(path, idx + 1, "expected `topic<TAB>sentence`, no TAB found")
                })?;
                topics.push(topic.to_owned());
                sentences.push(tokenize(rest));
            }
        }
    }
    match format {
        CorpusFormat::Lines => Ok(Corpus::new(sentences)),
        CorpusFormat::TopicTsv => Corpus::with_topics(sentences, topics),
    }
}

/// Writes a corpus back out in the given format (LF endings, single spaces
/// between tokens). Topic output requires a topic-labeled corpus.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>, format: CorpusFormat) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    match format {
        CorpusFormat::Lines => {
            for s in corpus.sentences() {
                out.push_str(&s.detokenize());
                out.push('\n');
            }
        }
        CorpusFormat::TopicTsv => {
            let topics = corpus
                .topics()
                .ok_or_else(|| Error::InvalidInput("corpus has no topic labels".into()))?;
            for (s, t) in corpus.sentences().iter().zip(topics) {
                out.push_str(t);
                out.push('\t');
                out.push_str(&s.detokenize());
                out.push('\n');
            }
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Deterministic shuffled split. The first part receives
/// `round(fraction * N)` sentences (round half up); topic labels travel
/// with their sentences.
pub fn split_corpus(corpus: &Corpus, fraction: f64, seed: RngSeed) -> Result<(Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty corpus".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must be in (0,1), got {fraction}"
        )));
    }
    let n = corpus.len();
    let mut indices: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut indices);
    let first = (fraction * n as f64).round() as usize;
    let (a, b) = indices.split_at(first.min(n));
    Ok((corpus.select(a), corpus.select(b)))
}

/// Keeps only sentences whose topic is in `keep`, preserving order.
/// Labels in `keep` that never occur in the corpus are logged as warnings;
/// the reference set may legitimately carry more topics than the samples.
pub fn filter_topics(corpus: &Corpus, keep: &BTreeSet<String>) -> Result<Corpus> {
    let topics = corpus.topics().ok_or_else(|| {
        Error::InvalidInput("filter_topics requires a topic-labeled corpus".into())
    })?;
    let present: BTreeSet<&str> = topics.iter().map(String::as_str).collect();
    for label in keep {
        if !present.contains(label.as_str()) {
            log::warn!("topic {label:?} not present in corpus");
        }
    }
    let indices: Vec<usize> = topics
        .iter()
        .enumerate()
        .filter(|(_, t)| keep.contains(*t))
        .map(|(i, _)| i)
        .collect();
    Ok(corpus.select(&indices))
}

/// Derives a per-sentence RNG stream; used by the perturbation ops so that
/// results do not depend on evaluation order.
pub(crate) fn sentence_rng(seed: RngSeed, sentence_index: usize) -> SplitMix64 {
    SplitMix64::new(derive_seed(seed, sentence_index as u64))
}
