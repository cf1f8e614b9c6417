//! Count-based interpolated Kneser-Ney n-gram language model, the backend
//! for the LM score and reverse LM score, plus ingestion of externally
//! computed per-sentence log-probabilities.
//!
//! Single discount per order: the top level discounts raw counts, lower
//! levels discount continuation (distinct-left-context) counts, and the
//! unigram distribution is interpolated with a uniform floor over the
//! prediction vocabulary so no probability is ever zero.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;
const FIRST_REGULAR_ID: u32 = 3;

/// One interpolation level: the count table actually discounted at this
/// level (raw counts at the top, continuation counts below) and per-history
/// aggregates.
#[derive(Debug, Clone, Default)]
struct Level {
    /// gram (k ids) -> count.
    grams: HashMap<Vec<u32>, u64>,
    /// history (k-1 ids) -> (sum of counts, number of distinct continuations).
    histories: HashMap<Vec<u32>, (u64, u64)>,
}

impl Level {
    fn from_grams(grams: HashMap<Vec<u32>, u64>) -> Self {
        let mut histories: HashMap<Vec<u32>, (u64, u64)> = HashMap::new();
        for (gram, &count) in &grams {
            let entry = histories
                .entry(gram[..gram.len() - 1].to_vec())
                .or_insert((0, 0));
            entry.0 += count;
            entry.1 += 1;
        }
        Level { grams, histories }
    }

    /// Chen-Goodman discount n1/(n1 + 2 n2) from this table's
    /// count-of-counts, falling back to 0.75 when either is zero.
    fn discount(&self) -> f64 {
        let n1 = self.grams.values().filter(|&&c| c == 1).count() as f64;
        let n2 = self.grams.values().filter(|&&c| c == 2).count() as f64;
        if n1 == 0.0 || n2 == 0.0 {
            0.75
        } else {
            n1 / (n1 + 2.0 * n2)
        }
    }
}

/// Interpolated Kneser-Ney n-gram model.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    min_count: u64,
    /// Regular token -> id (reserved tokens are handled separately).
    vocab: HashMap<String, u32>,
    /// id - FIRST_REGULAR_ID -> token, in id order.
    vocab_list: Vec<String>,
    /// levels[k-1] backs the order-k distribution.
    levels: Vec<Level>,
    discounts: Vec<f64>,
    /// Raw per-order count tables, kept for serialization; the levels are
    /// derived from these.
    raw_counts: Vec<HashMap<Vec<u32>, u64>>,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_list.len()
    }

    /// Tokens the model can predict: regular vocab plus `<unk>` and `</s>`.
    pub fn prediction_vocab(&self) -> Vec<String> {
        let mut v: Vec<String> = self.vocab_list.clone();
        v.push(UNK.to_string());
        v.push(EOS.to_string());
        v
    }

    /// Every history observed in training, at every interpolation level,
    /// as token strings (possibly containing `<s>`).
    pub fn seen_histories(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for level in &self.levels {
            for h in level.histories.keys() {
                out.push(h.iter().map(|&id| self.id_to_token(id)).collect());
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn id_to_token(&self, id: u32) -> String {
        match id {
            UNK_ID => UNK.to_string(),
            BOS_ID => BOS.to_string(),
            EOS_ID => EOS.to_string(),
            _ => self.vocab_list[(id - FIRST_REGULAR_ID) as usize].clone(),
        }
    }

    fn token_to_id(&self, token: &str) -> u32 {
        match token {
            BOS => BOS_ID,
            EOS => EOS_ID,
            UNK => UNK_ID,
            t => self.vocab.get(t).copied().unwrap_or(UNK_ID),
        }
    }

    /// 1 / |vocab + <unk> + </s>|, the uniform interpolation floor.
    fn uniform(&self) -> f64 {
        1.0 / (self.vocab_list.len() + 2) as f64
    }

    /// Interpolated probability at `level` (1-based) of `word` given the
    /// last `level - 1` ids of `history`.
    fn prob_level(&self, level: usize, history: &[u32], word: u32) -> f64 {
        debug_assert_eq!(history.len(), level - 1);
        let lvl = &self.levels[level - 1];
        let d = self.discounts[level - 1];
        if level == 1 {
            let (total, distinct) = lvl.histories.get(&Vec::new()).copied().unwrap_or((0, 0));
            if total == 0 {
                return self.uniform();
            }
            let c = lvl.grams.get(&vec![word]).copied().unwrap_or(0);
            let discounted = (c as f64 - d).max(0.0);
            return (discounted + d * distinct as f64 * self.uniform()) / total as f64;
        }
        match lvl.histories.get(history) {
            None => self.prob_level(level - 1, &history[1..], word),
            Some(&(total, distinct)) => {
                let mut gram = Vec::with_capacity(level);
                gram.extend_from_slice(history);
                gram.push(word);
                let c = lvl.grams.get(&gram).copied().unwrap_or(0);
                let discounted = (c as f64 - d).max(0.0);
                let lower = self.prob_level(level - 1, &history[1..], word);
                (discounted + d * distinct as f64 * lower) / total as f64
            }
        }
    }

    /// p(word | history) with the history padded/truncated to order-1
    /// tokens. Unknown tokens map to `<unk>`.
    pub fn conditional_prob(&self, history: &[&str], word: &str) -> f64 {
        let mut ids = vec![BOS_ID; self.order.saturating_sub(1)];
        ids.extend(history.iter().map(|t| self.token_to_id(t)));
        let start = ids.len() - (self.order - 1);
        self.prob_level(self.order, &ids[start..], self.token_to_id(word))
    }

    /// Natural-log probability of a sentence, including the terminating
    /// `</s>` and excluding the `<s>` padding. Always finite.
    pub fn log_prob_sentence(&self, sentence: &Sentence) -> f64 {
        let mut ids = vec![BOS_ID; self.order - 1];
        ids.extend(sentence.tokens().iter().map(|t| self.token_to_id(t)));
        ids.push(EOS_ID);
        let mut total = 0.0;
        for pos in self.order - 1..ids.len() {
            let history = &ids[pos - (self.order - 1)..pos];
            total += self.prob_level(self.order, history, ids[pos]).ln();
        }
        total
    }

    fn count_oov(&self, sentence: &Sentence) -> usize {
        sentence
            .tokens()
            .iter()
            .filter(|t| {
                !matches!(t.as_str(), BOS | EOS | UNK) && !self.vocab.contains_key(t.as_str())
            })
            .count()
    }

    /// Writes the model as a versioned sorted text dump of its raw count
    /// tables; [`NGramModel::load`] rebuilds the derived tables and yields
    /// bit-identical probabilities.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str("tgeval-ngram/1\n");
        out.push_str(&format!("order {}\n", self.order));
        out.push_str(&format!("min_count {}\n", self.min_count));
        let mut vocab = self.vocab_list.clone();
        vocab.sort();
        out.push_str(&format!("vocab {}\n", vocab.len()));
        for token in &vocab {
            out.push_str(token);
            out.push('\n');
        }
        // Raw per-order tables are the primary data; continuation tables,
        // history aggregates and discounts are rebuilt on load.
        for (k, table) in self.raw_tables().iter().enumerate() {
            let mut entries: Vec<(String, u64)> = table
                .iter()
                .map(|(gram, &count)| {
                    let text = gram
                        .iter()
                        .map(|&id| self.id_to_token(id))
                        .collect::<Vec<_>>()
                        .join(" ");
                    (text, count)
                })
                .collect();
            entries.sort();
            out.push_str(&format!("grams {} {}\n", k + 1, entries.len()));
            for (text, count) in entries {
                out.push_str(&format!("{text}\t{count}\n"));
            }
        }
        out.push_str("end\n");
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    fn raw_tables(&self) -> &[HashMap<Vec<u32>, u64>] {
        &self.raw_counts
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NGramModel> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, &str)> {
            lines.next().map(|(i, l)| (i + 1, l)).ok_or_else(|| {
                Error::format(
                    path,
                    0,
                    format!("unexpected end of file, expected {expect}"),
                )
            })
        };

        let (line_no, header) = next("header")?;
        if header != "tgeval-ngram/1" {
            return Err(Error::format(
                path,
                line_no,
                format!("unsupported model header {header:?}"),
            ));
        }
        let parse_kv = |line_no: usize, line: &str, key: &str| -> Result<u64> {
            let rest = line.strip_prefix(key).and_then(|r| r.strip_prefix(' '));
            rest.and_then(|r| r.parse().ok()).ok_or_else(|| {
                Error::format(path, line_no, format!("expected `{key} <n>`, got {line:?}"))
            })
        };
        let (ln, line) = next("order")?;
        let order = parse_kv(ln, line, "order")? as usize;
        let (ln, line) = next("min_count")?;
        let min_count = parse_kv(ln, line, "min_count")?;
        let (ln, line) = next("vocab")?;
        let vocab_len = parse_kv(ln, line, "vocab")? as usize;

        let mut vocab_list = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let (_, token) = next("vocab entry")?;
            vocab_list.push(token.to_string());
        }
        let vocab: HashMap<String, u32> = vocab_list
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), FIRST_REGULAR_ID + i as u32))
            .collect();
        let token_to_id = |t: &str| -> u32 {
            match t {
                UNK => UNK_ID,
                BOS => BOS_ID,
                EOS => EOS_ID,
                other => vocab.get(other).copied().unwrap_or(UNK_ID),
            }
        };

        let mut raw_counts: Vec<HashMap<Vec<u32>, u64>> = Vec::with_capacity(order);
        for k in 1..=order {
            let (ln, line) = next("grams header")?;
            let rest = line
                .strip_prefix(&format!("grams {k} "))
                .ok_or_else(|| Error::format(path, ln, format!("expected `grams {k} <n>`")))?;
            let n_entries: usize = rest
                .parse()
                .map_err(|_| Error::format(path, ln, format!("bad entry count {rest:?}")))?;
            let mut table = HashMap::with_capacity(n_entries);
            for _ in 0..n_entries {
                let (ln, line) = next("gram entry")?;
                let (gram_text, count_text) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::format(path, ln, "expected `gram<TAB>count`"))?;
                let gram: Vec<u32> = gram_text.split(' ').map(token_to_id).collect();
                if gram.len() != k {
                    return Err(Error::format(
                        path,
                        ln,
                        format!("gram {gram_text:?} has wrong length for order {k}"),
                    ));
                }
                let count: u64 = count_text
                    .parse()
                    .map_err(|_| Error::format(path, ln, format!("bad count {count_text:?}")))?;
                table.insert(gram, count);
            }
            raw_counts.push(table);
        }
        let (ln, line) = next("end")?;
        if line != "end" {
            return Err(Error::format(path, ln, "missing `end` marker"));
        }

        Ok(Self::assemble(
            order, min_count, vocab, vocab_list, raw_counts,
        ))
    }

    /// Builds the interpolation levels and discounts from raw counts.
    fn assemble(
        order: usize,
        min_count: u64,
        vocab: HashMap<String, u32>,
        vocab_list: Vec<String>,
        raw_counts: Vec<HashMap<Vec<u32>, u64>>,
    ) -> NGramModel {
        let mut levels = Vec::with_capacity(order);
        for k in 1..=order {
            let table = if k == order {
                raw_counts[k - 1].clone()
            } else {
                // Continuation counts: number of distinct single-token left
                // extensions of each k-gram in the raw (k+1)-gram table.
                let mut cont: HashMap<Vec<u32>, u64> = HashMap::new();
                for gram in raw_counts[k].keys() {
                    *cont.entry(gram[1..].to_vec()).or_insert(0) += 1;
                }
                cont
            };
            levels.push(Level::from_grams(table));
        }
        let discounts = levels.iter().map(Level::discount).collect();
        NGramModel {
            order,
            min_count,
            vocab,
            vocab_list,
            levels,
            discounts,
            raw_counts,
        }
    }
}

/// Trains an interpolated Kneser-Ney model.
///
/// The vocabulary keeps tokens occurring at least `min_count` times; the
/// rest are mapped to `<unk>` before counting. Sentences are padded with
/// order-1 `<s>` and one `</s>`. Input tokens spelled exactly like the
/// reserved `<s>`, `</s>` or `<unk>` unify with the reserved items.
pub fn train_lm(train: &Corpus, order: usize, min_count: u64) -> Result<NGramModel> {
    if train.is_empty() {
        return Err(Error::InvalidInput(
            "cannot train on an empty corpus".into(),
        ));
    }
    if !(1..=5).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "LM order must be in [1,5], got {order}"
        )));
    }

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for sentence in train.sentences() {
        for token in sentence.tokens() {
            if !matches!(token.as_str(), BOS | EOS | UNK) {
                *freq.entry(token).or_insert(0) += 1;
            }
        }
    }
    let mut vocab_list: Vec<String> = freq
        .iter()
        .filter(|(_, &c)| c >= min_count.max(1))
        .map(|(&t, _)| t.to_string())
        .collect();
    vocab_list.sort();
    let vocab: HashMap<String, u32> = vocab_list
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), FIRST_REGULAR_ID + i as u32))
        .collect();

    let mut raw_counts: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    for sentence in train.sentences() {
        let mut ids = vec![BOS_ID; order - 1];
        ids.extend(sentence.tokens().iter().map(|t| match t.as_str() {
            BOS => BOS_ID,
            EOS => EOS_ID,
            UNK => UNK_ID,
            other => vocab.get(other).copied().unwrap_or(UNK_ID),
        }));
        ids.push(EOS_ID);
        for k in 1..=order {
            if ids.len() < k {
                continue;
            }
            let table = &mut raw_counts[k - 1];
            for window in ids.windows(k) {
                // Windows ending inside the <s> padding belong to no
                // prediction event.
                if *window.last().unwrap() == BOS_ID {
                    continue;
                }
                *table.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
    }

    Ok(NGramModel::assemble(
        order, min_count, vocab, vocab_list, raw_counts,
    ))
}

/// Perplexity report for a sample set under a model.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub per_token_ppl: f64,
    pub total_log_prob: f64,
    pub token_count: u64,
    pub oov_rate: f64,
}

impl ScoreReport {
    fn from_totals(total_log_prob: f64, token_count: u64, oov: u64, corpus_tokens: u64) -> Self {
        ScoreReport {
            per_token_ppl: (-total_log_prob / token_count as f64).exp(),
            total_log_prob,
            token_count,
            oov_rate: if corpus_tokens == 0 {
                0.0
            } else {
                oov as f64 / corpus_tokens as f64
            },
        }
    }
}

/// Per-token perplexity of `samples` under a model trained on real data:
/// the LM score (lower means higher sample quality).
pub fn lm_score(model_trained_on_real: &NGramModel, samples: &Corpus) -> Result<ScoreReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty corpus".into()));
    }
    let per_sentence: Vec<(f64, usize)> = samples
        .sentences()
        .par_iter()
        .map(|s| {
            (
                model_trained_on_real.log_prob_sentence(s),
                model_trained_on_real.count_oov(s),
            )
        })
        .collect();
    let mut total = 0.0;
    let mut oov = 0u64;
    for (lp, o) in &per_sentence {
        total += lp;
        oov += *o as u64;
    }
    let token_count = samples.sentences().iter().map(|s| s.len() as u64 + 1).sum();
    let corpus_tokens = samples.token_count() as u64;
    Ok(ScoreReport::from_totals(
        total,
        token_count,
        oov,
        corpus_tokens,
    ))
}

/// Trains a model on the generated samples and evaluates held-out real
/// text under it: the reverse LM score (recall proxy; a generator that
/// only emits a few likely sentences scores badly here).
pub fn reverse_lm_score(
    samples: &Corpus,
    real_heldout: &Corpus,
    order: usize,
    min_count: u64,
) -> Result<ScoreReport> {
    if real_heldout.is_empty() {
        return Err(Error::InvalidInput("held-out corpus is empty".into()));
    }
    let model = train_lm(samples, order, min_count)?;
    lm_score(&model, real_heldout)
}

/// One externally computed sentence score: natural-log probability and the
/// token count it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalScore {
    pub log_prob: f64,
    pub tokens: u64,
}

/// Loads `logprob<TAB>ntokens` lines. Log-probabilities must be <= 0 and
/// finite; token counts must be >= 1.
pub fn load_external_scores(path: impl AsRef<Path>) -> Result<Vec<ExternalScore>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scores = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let (lp_text, tok_text) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, idx + 1, "expected `logprob<TAB>ntokens`"))?;
        let log_prob: f64 = lp_text.trim().parse().map_err(|_| {
            Error::format(path, idx + 1, format!("bad log-probability {lp_text:?}"))
        })?;
        if !log_prob.is_finite() || log_prob > 0.0 {
            return Err(Error::format(
                path,
                idx + 1,
                format!("log-probability must be finite and <= 0, got {log_prob}"),
            ));
        }
        let tokens: u64 = tok_text
            .trim()
            .parse()
            .map_err(|_| Error::format(path, idx + 1, format!("bad token count {tok_text:?}")))?;
        if tokens == 0 {
            return Err(Error::format(path, idx + 1, "token count must be >= 1"));
        }
        scores.push(ExternalScore { log_prob, tokens });
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no scores found in {}",
            path.display()
        )));
    }
    Ok(scores)
}

/// Aggregates external scores into a perplexity report. OOV information is
/// not available externally and is reported as 0.
pub fn external_score_report(scores: &[ExternalScore]) -> Result<ScoreReport> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no external scores provided".into()));
    }
    let total: f64 = scores.iter().map(|s| s.log_prob).sum();
    let tokens: u64 = scores.iter().map(|s| s.tokens).sum();
    Ok(ScoreReport::from_totals(total, tokens, 0, 0))
}
