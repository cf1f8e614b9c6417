//! Controlled deterioration of sample sets: word dropout, word swapping and
//! topic-based mode dropping, plus a tunable synthetic sampler that stands
//! in for a trainable model in protocol tests.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::{filter_topics, sentence_rng, Corpus, Sentence};
use crate::error::{Error, Result};
use crate::metrics::{EngineConfig, MetricEngine, MetricKind};
use crate::rng::{derive_seed, RngSeed, SplitMix64};

/// Quality knobs of the synthetic sampler: the ideal setting (0, 0)
/// reproduces the reference distribution.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationConfig {
    pub dropout_p: f64,
    pub swap_fraction: f64,
    pub seed: RngSeed,
}

impl PerturbationConfig {
    fn validate(&self) -> Result<()> {
        check_rate(self.dropout_p, "dropout probability")?;
        check_rate(self.swap_fraction, "swap fraction")
    }
}

fn check_rate(value: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidArgument(format!(
            "{what} must be in [0,1], got {value}"
        )));
    }
    Ok(())
}

/// Removes each token independently with probability `p`. Sentences may
/// become empty and are kept as empty; topic labels never change.
pub fn word_dropout(corpus: &Corpus, p: f64, seed: RngSeed) -> Result<Corpus> {
    check_rate(p, "dropout probability")?;
    let sentences = corpus
        .sentences()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = sentence_rng(seed, i);
            let kept: Vec<String> = s
                .tokens()
                .iter()
                .filter(|_| rng.next_f64() >= p)
                .cloned()
                .collect();
            Sentence::from_tokens_unchecked(kept)
        })
        .collect();
    rebuild_with_topics(corpus, sentences)
}

/// Selects `round(fraction * len)` positions per sentence uniformly without
/// replacement and applies a uniform random permutation to the selected
/// tokens. The per-sentence token multiset is preserved exactly.
pub fn word_swap(corpus: &Corpus, fraction: f64, seed: RngSeed) -> Result<Corpus> {
    check_rate(fraction, "swap fraction")?;
    let sentences = corpus
        .sentences()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let len = s.len();
            let k = (fraction * len as f64).round() as usize;
            if k <= 1 {
                return s.clone();
            }
            let mut rng = sentence_rng(seed, i);
            let mut positions: Vec<usize> = (0..len).collect();
            rng.shuffle(&mut positions);
            let mut selected = positions[..k].to_vec();
            selected.sort_unstable();

            let mut tokens = s.tokens().to_vec();
            let mut picked: Vec<String> = selected.iter().map(|&p| tokens[p].clone()).collect();
            rng.shuffle(&mut picked);
            for (&pos, token) in selected.iter().zip(picked) {
                tokens[pos] = token;
            }
            Sentence::from_tokens_unchecked(tokens)
        })
        .collect();
    rebuild_with_topics(corpus, sentences)
}

fn rebuild_with_topics(original: &Corpus, sentences: Vec<Sentence>) -> Result<Corpus> {
    match original.topics() {
        Some(topics) => Corpus::with_topics(sentences, topics.to_vec()),
        None => Ok(Corpus::new(sentences)),
    }
}

/// Draws `n` sentences uniformly with replacement from the reference, then
/// applies word dropout and word swapping per the config.
pub fn synthetic_sampler(reference: &Corpus, cfg: &PerturbationConfig, n: usize) -> Result<Corpus> {
    cfg.validate()?;
    if reference.is_empty() {
        return Err(Error::InvalidInput(
            "synthetic sampler needs a nonempty reference".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rng = SplitMix64::new(derive_seed(cfg.seed, 0));
    let indices: Vec<usize> = (0..n).map(|_| rng.below(reference.len())).collect();
    let resampled = reference.select(&indices);
    let dropped = word_dropout(&resampled, cfg.dropout_p, derive_seed(cfg.seed, 1))?;
    word_swap(&dropped, cfg.swap_fraction, derive_seed(cfg.seed, 2))
}

/// Configuration of a mode-dropping evaluation run.
#[derive(Debug, Clone)]
pub struct ModeDropConfig {
    /// Number of topics kept per repeat.
    pub keep_k: usize,
    /// Independent repeats averaged in the report.
    pub repeats: usize,
    /// Fixed sample-set size drawn from the filtered corpus per repeat, so
    /// metric values are comparable across keep_k.
    pub sample_size: usize,
    pub metrics: Vec<MetricKind>,
    pub seed: RngSeed,
    pub engine: EngineConfig,
}

/// Averaged metric report of a mode-dropping evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ModeDropReport {
    pub keep_k: usize,
    pub repeats: usize,
    pub sample_size: usize,
    /// Per-metric mean over repeats.
    pub means: BTreeMap<String, f64>,
    /// Per-repeat metric values, in repeat order.
    pub per_repeat: Vec<BTreeMap<String, f64>>,
    /// Topics chosen per repeat.
    pub chosen_topics: Vec<Vec<String>>,
    /// Repeats where the filtered corpus was smaller than the sample size
    /// and sampling fell back to drawing with replacement.
    pub sampled_with_replacement: Vec<bool>,
}

/// Emulates mode collapse: per repeat, keeps `keep_k` randomly chosen
/// topics of the training corpus, draws a fixed-size sample set from the
/// filtered sentences and computes the selected metrics against the
/// full-topic reference. Reports per-metric means over the repeats.
pub fn mode_drop_eval(
    train: &Corpus,
    reference: &Corpus,
    cfg: &ModeDropConfig,
) -> Result<ModeDropReport> {
    let topics: Vec<String> = train
        .distinct_topics()
        .ok_or_else(|| Error::InvalidInput("mode-drop train corpus needs topic labels".into()))?
        .into_iter()
        .map(str::to_string)
        .collect();
    if cfg.keep_k == 0 || cfg.keep_k > topics.len() {
        return Err(Error::InvalidArgument(format!(
            "keep_k {} out of range for {} distinct topics",
            cfg.keep_k,
            topics.len()
        )));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    if cfg.sample_size == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }

    // The reference doubles as the held-out set for the reverse LM score.
    let mut engine = MetricEngine::new(reference.clone(), reference.clone(), cfg.engine.clone())?;
    engine.prepare(&cfg.metrics)?;

    let mut per_repeat = Vec::with_capacity(cfg.repeats);
    let mut chosen_topics = Vec::with_capacity(cfg.repeats);
    let mut replacement_flags = Vec::with_capacity(cfg.repeats);
    for repeat in 0..cfg.repeats {
        let repeat_seed = derive_seed(cfg.seed, repeat as u64);
        let mut rng = SplitMix64::new(repeat_seed);

        let mut shuffled = topics.clone();
        rng.shuffle(&mut shuffled);
        let mut keep: Vec<String> = shuffled[..cfg.keep_k].to_vec();
        keep.sort();
        let keep_set: BTreeSet<String> = keep.iter().cloned().collect();
        let filtered = filter_topics(train, &keep_set)?;
        if filtered.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no sentences left after keeping topics {keep:?}"
            )));
        }

        let with_replacement = filtered.len() < cfg.sample_size;
        if with_replacement {
            log::warn!(
                "repeat {repeat}: filtered corpus has {} sentences < sample size {}; \
                 sampling with replacement",
                filtered.len(),
                cfg.sample_size
            );
        }
        let samples = draw_sample(&filtered, cfg.sample_size, &mut rng);
        let second = draw_sample(&filtered, cfg.sample_size, &mut rng);

        let (values, _notes) = engine.compute(
            &cfg.metrics,
            &samples,
            Some(&second),
            derive_seed(repeat_seed, 1),
        )?;
        per_repeat.push(values);
        chosen_topics.push(keep);
        replacement_flags.push(with_replacement);
    }

    let mut means = BTreeMap::new();
    for metric in &cfg.metrics {
        let name = metric.name();
        let sum: f64 = per_repeat.iter().map(|r| r[name]).sum();
        means.insert(name.to_string(), sum / cfg.repeats as f64);
    }

    Ok(ModeDropReport {
        keep_k: cfg.keep_k,
        repeats: cfg.repeats,
        sample_size: cfg.sample_size,
        means,
        per_repeat,
        chosen_topics,
        sampled_with_replacement: replacement_flags,
    })
}

/// Fixed-size draw: without replacement when the pool is large enough,
/// with replacement otherwise.
fn draw_sample(pool: &Corpus, size: usize, rng: &mut SplitMix64) -> Corpus {
    if pool.len() >= size {
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        rng.shuffle(&mut indices);
        pool.select(&indices[..size])
    } else {
        let indices: Vec<usize> = (0..size).map(|_| rng.below(pool.len())).collect();
        pool.select(&indices)
    }
}
