//! Corpus-level BLEU, self-BLEU and unique n-gram counting.
//!
//! Dataset-level BLEU here means: every sample sentence is scored as a
//! hypothesis against the *entire* reference corpus (each reference
//! sentence is one reference), and the corpus score is the arithmetic mean
//! of the sentence scores. This is the convention of the GAN-for-text
//! literature; it is pinned so numbers are reproducible.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

/// N-gram counts of a sentence or corpus at a fixed order.
#[derive(Debug, Clone)]
pub struct NGramCounts {
    order: usize,
    counts: HashMap<Vec<String>, u64>,
}

impl NGramCounts {
    pub fn from_sentence(sentence: &Sentence, order: usize) -> Self {
        let mut counts = HashMap::new();
        if order >= 1 && sentence.len() >= order {
            for window in sentence.tokens().windows(order) {
                *counts.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
        NGramCounts { order, counts }
    }

    pub fn from_corpus(corpus: &Corpus, order: usize) -> Self {
        let mut counts = HashMap::new();
        if order >= 1 {
            for sentence in corpus.sentences() {
                if sentence.len() >= order {
                    for window in sentence.tokens().windows(order) {
                        *counts.entry(window.to_vec()).or_insert(0) += 1;
                    }
                }
            }
        }
        NGramCounts { order, counts }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, gram: &[String]) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Number of distinct n-grams.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Total occurrences (sum of counts).
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Zero-count handling for sentence BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// Any zero modified precision makes the sentence score 0.
    None,
    /// Zero precisions are replaced by a small epsilon floor.
    Epsilon,
}

#[derive(Debug, Clone)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
    pub epsilon: f64,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: 4,
            smoothing: Smoothing::Epsilon,
            epsilon: 1e-9,
        }
    }
}

impl BleuConfig {
    fn validate(&self) -> Result<()> {
        if !(1..=9).contains(&self.max_order) {
            return Err(Error::InvalidArgument(format!(
                "BLEU max_order must be in [1,9], got {}",
                self.max_order
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "BLEU epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Clipped n-gram matches of a hypothesis against a reference set.
///
/// Returns `(clipped_matches, total)` where `total` is the number of
/// n-gram positions in the hypothesis and each distinct hypothesis n-gram
/// is clipped to its maximum count within any single reference.
pub fn modified_precision(
    hypothesis: &Sentence,
    references: &[Sentence],
    order: usize,
) -> Result<(u64, u64)> {
    if order < 1 {
        return Err(Error::InvalidArgument("n-gram order must be >= 1".into()));
    }
    let total = hypothesis.len().saturating_sub(order - 1) as u64;
    if total == 0 {
        return Ok((0, 0));
    }
    let hyp = NGramCounts::from_sentence(hypothesis, order);
    let ref_counts: Vec<NGramCounts> = references
        .iter()
        .map(|r| NGramCounts::from_sentence(r, order))
        .collect();
    let mut clipped = 0;
    for (gram, &count) in &hyp.counts {
        let max_ref = ref_counts.iter().map(|rc| rc.get(gram)).max().unwrap_or(0);
        clipped += count.min(max_ref);
    }
    Ok((clipped, total))
}

/// Reference corpus preprocessed for repeated BLEU scoring: per-order
/// tables of the maximum within-sentence count of each n-gram, plus the
/// sorted reference lengths for the brevity penalty.
pub struct BleuScorer {
    cfg: BleuConfig,
    // token -> id over the reference vocabulary; unknown hypothesis tokens
    // can never match, so they all share one sentinel id.
    vocab: HashMap<String, u32>,
    // max_counts[k-1]: id-tuple of length k -> max count in any single reference.
    max_counts: Vec<HashMap<Vec<u32>, u64>>,
    ref_lengths: Vec<usize>,
}

const UNSEEN: u32 = u32::MAX;

impl BleuScorer {
    pub fn new(reference: &Corpus, cfg: BleuConfig) -> Result<Self> {
        cfg.validate()?;
        if reference.is_empty() {
            return Err(Error::InvalidInput(
                "BLEU reference corpus must be nonempty".into(),
            ));
        }
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut ids: Vec<Vec<u32>> = Vec::with_capacity(reference.len());
        for sentence in reference.sentences() {
            let row = sentence
                .tokens()
                .iter()
                .map(|t| {
                    let next = vocab.len() as u32;
                    *vocab.entry(t.clone()).or_insert(next)
                })
                .collect();
            ids.push(row);
        }

        let mut max_counts = vec![HashMap::new(); cfg.max_order];
        let mut within: HashMap<Vec<u32>, u64> = HashMap::new();
        for row in &ids {
            for k in 1..=cfg.max_order {
                if row.len() < k {
                    continue;
                }
                within.clear();
                for window in row.windows(k) {
                    *within.entry(window.to_vec()).or_insert(0) += 1;
                }
                let table = &mut max_counts[k - 1];
                for (gram, count) in within.drain() {
                    let entry = table.entry(gram).or_insert(0);
                    *entry = (*entry).max(count);
                }
            }
        }

        let mut ref_lengths: Vec<usize> = ids.iter().map(Vec::len).collect();
        ref_lengths.sort_unstable();
        ref_lengths.dedup();

        Ok(BleuScorer {
            cfg,
            vocab,
            max_counts,
            ref_lengths,
        })
    }

    /// Closest reference length to `len`; ties break toward the shorter.
    fn closest_ref_len(&self, len: usize) -> usize {
        let lengths = &self.ref_lengths;
        match lengths.binary_search(&len) {
            Ok(_) => len,
            Err(pos) => {
                if pos == 0 {
                    lengths[0]
                } else if pos == lengths.len() {
                    lengths[pos - 1]
                } else {
                    let below = lengths[pos - 1];
                    let above = lengths[pos];
                    if len - below <= above - len {
                        below
                    } else {
                        above
                    }
                }
            }
        }
    }

    fn sentence_stats(&self, sentence: &Sentence) -> SentenceBleu {
        let ids: Vec<u32> = sentence
            .tokens()
            .iter()
            .map(|t| self.vocab.get(t).copied().unwrap_or(UNSEEN))
            .collect();
        let mut clipped = vec![0u64; self.cfg.max_order];
        let mut totals = vec![0u64; self.cfg.max_order];
        let mut hyp_counts: HashMap<&[u32], u64> = HashMap::new();
        for k in 1..=self.cfg.max_order {
            if ids.len() < k {
                continue;
            }
            totals[k - 1] = (ids.len() - k + 1) as u64;
            hyp_counts.clear();
            for window in ids.windows(k) {
                *hyp_counts.entry(window).or_insert(0) += 1;
            }
            let table = &self.max_counts[k - 1];
            let mut matched = 0;
            for (gram, &count) in &hyp_counts {
                if gram.contains(&UNSEEN) {
                    continue;
                }
                let max_ref = table.get(*gram).copied().unwrap_or(0);
                matched += count.min(max_ref);
            }
            clipped[k - 1] = matched;
        }

        let score = if ids.is_empty() {
            // Zero-length hypothesis contributes 0 by contract.
            0.0
        } else {
            let mut log_sum = 0.0;
            let mut zero = false;
            for k in 0..self.cfg.max_order {
                let p = if totals[k] == 0 {
                    0.0
                } else {
                    clipped[k] as f64 / totals[k] as f64
                };
                let p = match self.cfg.smoothing {
                    Smoothing::Epsilon => {
                        if p == 0.0 {
                            self.cfg.epsilon
                        } else {
                            p
                        }
                    }
                    Smoothing::None => {
                        if p == 0.0 {
                            zero = true;
                            break;
                        }
                        p
                    }
                };
                log_sum += p.ln();
            }
            if zero {
                0.0
            } else {
                let c = ids.len();
                let r = self.closest_ref_len(c);
                let bp = if c < r {
                    (1.0 - r as f64 / c as f64).exp()
                } else {
                    1.0
                };
                bp * (log_sum / self.cfg.max_order as f64).exp()
            }
        };

        SentenceBleu {
            score,
            clipped,
            totals,
        }
    }

    /// Mean sentence-BLEU of the samples against this reference corpus.
    pub fn score(&self, samples: &Corpus) -> Result<BleuReport> {
        if samples.is_empty() {
            return Err(Error::InvalidInput(
                "BLEU sample corpus must be nonempty".into(),
            ));
        }
        let stats: Vec<SentenceBleu> = samples
            .sentences()
            .par_iter()
            .map(|s| self.sentence_stats(s))
            .collect();

        // Index-ordered summation keeps the result independent of thread
        // scheduling.
        let mut sum = 0.0;
        let mut clipped = vec![0u64; self.cfg.max_order];
        let mut totals = vec![0u64; self.cfg.max_order];
        for s in &stats {
            sum += s.score;
            for k in 0..self.cfg.max_order {
                clipped[k] += s.clipped[k];
                totals[k] += s.totals[k];
            }
        }
        let precisions = clipped
            .iter()
            .zip(&totals)
            .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
            .collect();
        Ok(BleuReport {
            bleu: sum / samples.len() as f64,
            precisions,
            clipped,
            totals,
        })
    }
}

#[derive(Debug)]
struct SentenceBleu {
    score: f64,
    clipped: Vec<u64>,
    totals: Vec<u64>,
}

/// Corpus BLEU value plus aggregate per-order precision diagnostics
/// (clipped matches and totals summed over all sample sentences).
#[derive(Debug, Clone, Serialize)]
pub struct BleuReport {
    pub bleu: f64,
    pub precisions: Vec<f64>,
    pub clipped: Vec<u64>,
    pub totals: Vec<u64>,
}

/// Dataset-level BLEU of `samples` against `reference`.
pub fn corpus_bleu(samples: &Corpus, reference: &Corpus, cfg: &BleuConfig) -> Result<f64> {
    Ok(corpus_bleu_report(samples, reference, cfg)?.bleu)
}

pub fn corpus_bleu_report(
    samples: &Corpus,
    reference: &Corpus,
    cfg: &BleuConfig,
) -> Result<BleuReport> {
    BleuScorer::new(reference, cfg.clone())?.score(samples)
}

/// BLEU of one sample set with the other as reference; high values mean the
/// two sets are similar to each other (low diversity).
pub fn self_bleu(set_a: &Corpus, set_b: &Corpus, cfg: &BleuConfig) -> Result<f64> {
    corpus_bleu(set_a, set_b, cfg)
}

/// Number of distinct token tuples of the given length across the corpus.
pub fn unique_ngrams(corpus: &Corpus, order: usize) -> Result<u64> {
    if order < 1 {
        return Err(Error::InvalidArgument("n-gram order must be >= 1".into()));
    }
    let mut seen: HashSet<&[String]> = HashSet::new();
    for sentence in corpus.sentences() {
        if sentence.len() >= order {
            for window in sentence.tokens().windows(order) {
                seen.insert(window);
            }
        }
    }
    Ok(seen.len() as u64)
}
