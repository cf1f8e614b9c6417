//! Shared test support: independent brute-force oracles (BLEU, Kneser-Ney)
//! and deterministic synthetic corpora. The oracles are written as naive
//! scans with no shared code or data structures with the implementations
//! they check.

#![allow(dead_code)]

use tgeval::corpus::{tokenize, Corpus, Sentence};
use tgeval::ngram::Smoothing;
use tgeval::rng::{RngSeed, SplitMix64};

pub fn corpus_of(lines: &[&str]) -> Corpus {
    Corpus::new(lines.iter().map(|l| tokenize(l)).collect())
}

pub fn corpus_from_strings(lines: &[String]) -> Corpus {
    Corpus::new(lines.iter().map(|l| tokenize(l)).collect())
}

// ---------------------------------------------------------------------------
// Naive dataset-level BLEU: per-sentence scoring against the whole reference
// corpus, written as direct window scans.
// ---------------------------------------------------------------------------

fn windows(tokens: &[String], k: usize) -> Vec<&[String]> {
    if tokens.len() < k || k == 0 {
        Vec::new()
    } else {
        tokens.windows(k).collect()
    }
}

fn count_occurrences(haystack: &[&[String]], needle: &[String]) -> u64 {
    haystack.iter().filter(|w| **w == needle).count() as u64
}

pub fn naive_corpus_bleu(
    samples: &Corpus,
    reference: &Corpus,
    max_order: usize,
    smoothing: Smoothing,
    epsilon: f64,
) -> f64 {
    assert!(!samples.is_empty() && !reference.is_empty());
    let mut total_score = 0.0;
    for hyp in samples.sentences() {
        total_score += naive_sentence_bleu(hyp, reference, max_order, smoothing, epsilon);
    }
    total_score / samples.len() as f64
}

fn naive_sentence_bleu(
    hyp: &Sentence,
    reference: &Corpus,
    max_order: usize,
    smoothing: Smoothing,
    epsilon: f64,
) -> f64 {
    let c = hyp.len();
    if c == 0 {
        return 0.0;
    }

    let mut log_sum = 0.0;
    for k in 1..=max_order {
        let hyp_windows = windows(hyp.tokens(), k);
        let total = hyp_windows.len() as u64;
        let mut clipped = 0u64;
        // Distinct hypothesis n-grams by first occurrence.
        let mut seen: Vec<&[String]> = Vec::new();
        for gram in &hyp_windows {
            if seen.iter().any(|s| s == gram) {
                continue;
            }
            seen.push(gram);
            let in_hyp = count_occurrences(&hyp_windows, gram);
            let mut max_ref = 0u64;
            for r in reference.sentences() {
                let rw = windows(r.tokens(), k);
                let in_ref = count_occurrences(&rw, gram);
                if in_ref > max_ref {
                    max_ref = in_ref;
                }
            }
            clipped += in_hyp.min(max_ref);
        }
        let p = if total == 0 {
            0.0
        } else {
            clipped as f64 / total as f64
        };
        let p = match smoothing {
            Smoothing::Epsilon => {
                if p == 0.0 {
                    epsilon
                } else {
                    p
                }
            }
            Smoothing::None => {
                if p == 0.0 {
                    return 0.0;
                }
                p
            }
        };
        log_sum += p.ln();
    }

    // Closest reference length, ties to the shorter.
    let mut best_len = reference.sentences()[0].len();
    for r in reference.sentences() {
        let len = r.len();
        let best_diff = best_len.abs_diff(c);
        let diff = len.abs_diff(c);
        if diff < best_diff || (diff == best_diff && len < best_len) {
            best_len = len;
        }
    }
    let bp = if c < best_len {
        (1.0 - best_len as f64 / c as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / max_order as f64).exp()
}

// ---------------------------------------------------------------------------
// Naive interpolated Kneser-Ney, recomputed from scratch per query with
// vector scans.
// ---------------------------------------------------------------------------

const UNK: &str = "<unk>";
const BOS: &str = "<s>";
const EOS: &str = "</s>";

pub struct NaiveKn {
    order: usize,
    vocab: Vec<String>,
    padded: Vec<Vec<String>>,
}

impl NaiveKn {
    pub fn train(corpus: &Corpus, order: usize, min_count: u64) -> NaiveKn {
        // Retained vocabulary by frequency.
        let mut counts: Vec<(String, u64)> = Vec::new();
        for s in corpus.sentences() {
            for t in s.tokens() {
                if t == BOS || t == EOS || t == UNK {
                    continue;
                }
                match counts.iter_mut().find(|(tok, _)| tok == t) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((t.clone(), 1)),
                }
            }
        }
        let vocab: Vec<String> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .map(|(t, _)| t)
            .collect();

        let map = |t: &str| -> String {
            let reserved = t == BOS || t == EOS || t == UNK;
            if reserved || vocab.iter().any(|v| v == t) {
                t.to_string()
            } else {
                UNK.to_string()
            }
        };
        let padded = corpus
            .sentences()
            .iter()
            .map(|s| {
                let mut seq = vec![BOS.to_string(); order - 1];
                seq.extend(s.tokens().iter().map(|t| map(t)));
                seq.push(EOS.to_string());
                seq
            })
            .collect();
        NaiveKn {
            order,
            vocab,
            padded,
        }
    }

    fn map_token(&self, t: &str) -> String {
        if t == BOS || t == EOS || t == UNK || self.vocab.iter().any(|v| v == t) {
            t.to_string()
        } else {
            UNK.to_string()
        }
    }

    /// All counted k-windows: every window of the order-padded sequences
    /// whose last token is not `<s>`.
    fn counted_windows(&self, k: usize) -> Vec<&[String]> {
        let mut out = Vec::new();
        for seq in &self.padded {
            if seq.len() < k {
                continue;
            }
            for w in seq.windows(k) {
                if w[k - 1] != BOS {
                    out.push(w);
                }
            }
        }
        out
    }

    fn distinct(windows: &[&[String]]) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        for w in windows {
            if !out.iter().any(|d| d.as_slice() == *w) {
                out.push(w.to_vec());
            }
        }
        out
    }

    /// Count table at interpolation level k: raw at the top, continuation
    /// (distinct left contexts in the raw k+1 table) below.
    fn level_entries(&self, k: usize) -> Vec<(Vec<String>, u64)> {
        if k == self.order {
            let windows = self.counted_windows(k);
            Self::distinct(&windows)
                .into_iter()
                .map(|gram| {
                    let count = count_occurrences(&windows, &gram);
                    (gram, count)
                })
                .collect()
        } else {
            let upper = self.counted_windows(k + 1);
            let distinct_upper = Self::distinct(&upper);
            let mut out: Vec<(Vec<String>, u64)> = Vec::new();
            for gram in &distinct_upper {
                let suffix = gram[1..].to_vec();
                match out.iter_mut().find(|(g, _)| *g == suffix) {
                    Some((_, c)) => *c += 1,
                    None => out.push((suffix, 1)),
                }
            }
            out
        }
    }

    fn discount(&self, k: usize) -> f64 {
        let entries = self.level_entries(k);
        let n1 = entries.iter().filter(|(_, c)| *c == 1).count() as f64;
        let n2 = entries.iter().filter(|(_, c)| *c == 2).count() as f64;
        if n1 == 0.0 || n2 == 0.0 {
            0.75
        } else {
            n1 / (n1 + 2.0 * n2)
        }
    }

    fn uniform(&self) -> f64 {
        1.0 / (self.vocab.len() + 2) as f64
    }

    fn prob_level(&self, k: usize, history: &[String], word: &str) -> f64 {
        let entries = self.level_entries(k);
        let d = self.discount(k);
        if k == 1 {
            let total: u64 = entries.iter().map(|(_, c)| c).sum();
            if total == 0 {
                return self.uniform();
            }
            let distinct = entries.len() as u64;
            let c = entries
                .iter()
                .find(|(g, _)| g.len() == 1 && g[0] == word)
                .map(|(_, c)| *c)
                .unwrap_or(0);
            let discounted = (c as f64 - d).max(0.0);
            return (discounted + d * distinct as f64 * self.uniform()) / total as f64;
        }
        let with_history: Vec<&(Vec<String>, u64)> = entries
            .iter()
            .filter(|(g, _)| &g[..k - 1] == history)
            .collect();
        let total: u64 = with_history.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return self.prob_level(k - 1, &history[1..], word);
        }
        let distinct = with_history.len() as u64;
        let c = with_history
            .iter()
            .find(|(g, _)| g[k - 1] == word)
            .map(|(_, c)| *c)
            .unwrap_or(0);
        let discounted = (c as f64 - d).max(0.0);
        let lower = self.prob_level(k - 1, &history[1..], word);
        (discounted + d * distinct as f64 * lower) / total as f64
    }

    /// p(word | history) with left `<s>` padding, mirroring the contract of
    /// the fast implementation.
    pub fn conditional_prob(&self, history: &[&str], word: &str) -> f64 {
        let mut h = vec![BOS.to_string(); self.order - 1];
        h.extend(history.iter().map(|t| self.map_token(t)));
        let h = h[h.len() - (self.order - 1)..].to_vec();
        self.prob_level(self.order, &h, &self.map_token(word))
    }

    pub fn log_prob_sentence(&self, sentence: &Sentence) -> f64 {
        let mut seq = vec![BOS.to_string(); self.order - 1];
        seq.extend(sentence.tokens().iter().map(|t| self.map_token(t)));
        seq.push(EOS.to_string());
        let mut total = 0.0;
        for pos in self.order - 1..seq.len() {
            let history = &seq[pos - (self.order - 1)..pos];
            total += self.prob_level(self.order, history, &seq[pos]).ln();
        }
        total
    }

    pub fn prediction_vocab(&self) -> Vec<String> {
        let mut v = self.vocab.clone();
        v.push(UNK.to_string());
        v.push(EOS.to_string());
        v
    }
}

// ---------------------------------------------------------------------------
// Deterministic synthetic corpora: topic clusters with distinct vocabularies
// built from fixed sentence templates.
// ---------------------------------------------------------------------------

pub const TEMPLATE_LEN: usize = 32;
pub const TEMPLATES_PER_TOPIC: usize = 40;
const TOPIC_VOCAB: usize = 30;
const SHARED_VOCAB: usize = 20;

/// Template `j` of topic `t`: a fixed 16-token sentence alternating shared
/// function-style tokens with tokens from the topic's private vocabulary,
/// so topics are vocabulary-distinct but not disjoint.
pub fn template(topic: usize, j: usize) -> String {
    (0..TEMPLATE_LEN)
        .map(|pos| {
            if pos % 2 == 0 {
                format!("sw{}", (j * 5 + pos) % SHARED_VOCAB)
            } else {
                format!("t{topic}w{}", (j * 7 + pos * 3 + topic) % TOPIC_VOCAB)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Topic-labeled corpus: `per_topic` sentences per topic, cycling over the
/// templates.
pub fn topic_train_corpus(topics: usize, per_topic: usize) -> Corpus {
    let mut sentences = Vec::with_capacity(topics * per_topic);
    let mut labels = Vec::with_capacity(topics * per_topic);
    for t in 0..topics {
        for i in 0..per_topic {
            sentences.push(tokenize(&template(t, i % TEMPLATES_PER_TOPIC)));
            labels.push(format!("T{t}"));
        }
    }
    Corpus::with_topics(sentences, labels).unwrap()
}

/// Unlabeled corpus containing every template `copies` times.
pub fn template_reference(topics: usize, copies: usize) -> Corpus {
    let mut sentences = Vec::new();
    for _ in 0..copies {
        for t in 0..topics {
            for j in 0..TEMPLATES_PER_TOPIC {
                sentences.push(tokenize(&template(t, j)));
            }
        }
    }
    Corpus::new(sentences)
}

/// Random tiny corpus over a small shared vocabulary, for oracle sweeps.
pub fn random_tiny_corpus(rng: &mut SplitMix64, max_sentences: usize, max_len: usize) -> Corpus {
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let n = 1 + rng.below(max_sentences);
    let sentences = (0..n)
        .map(|_| {
            let len = rng.below(max_len + 1);
            Sentence::new(
                (0..len)
                    .map(|_| vocab[rng.below(vocab.len())].to_string())
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    Corpus::new(sentences)
}

pub fn seeded(seed: u64) -> SplitMix64 {
    SplitMix64::new(RngSeed(seed))
}
