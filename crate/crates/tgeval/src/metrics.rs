//! Metric selection and a reusable engine that prepares reference-side
//! resources (BLEU tables, reference embedding statistics, the real-data
//! LM) once and evaluates sample sets against them repeatedly.

use std::collections::BTreeMap;

use crate::corpus::{split_corpus, Corpus};
use crate::embed::{hash_embed_corpus, HashEmbedderConfig};
use crate::error::{Error, Result};
use crate::frechet::{fit_gaussian, frechet_distance_report, GaussianStats};
use crate::lm::{lm_score, reverse_lm_score, train_lm, NGramModel};
use crate::ngram::{unique_ngrams, BleuConfig, BleuScorer};
use crate::rng::{derive_seed, RngSeed};

/// The metric suite. Names follow the reporting convention (order-4
/// defaults): `unique_4grams`, `bleu4`, `self_bleu4`, `fd`, `lm_score`,
/// `reverse_lm_score`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    UniqueNgrams,
    Bleu,
    SelfBleu,
    Fd,
    LmScore,
    ReverseLmScore,
}

impl MetricKind {
    /// All metrics in the canonical reporting order.
    pub fn all() -> [MetricKind; 6] {
        [
            MetricKind::UniqueNgrams,
            MetricKind::Bleu,
            MetricKind::SelfBleu,
            MetricKind::Fd,
            MetricKind::LmScore,
            MetricKind::ReverseLmScore,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::UniqueNgrams => "unique_4grams",
            MetricKind::Bleu => "bleu4",
            MetricKind::SelfBleu => "self_bleu4",
            MetricKind::Fd => "fd",
            MetricKind::LmScore => "lm_score",
            MetricKind::ReverseLmScore => "reverse_lm_score",
        }
    }

    /// Whether smaller values indicate a better model.
    pub fn lower_is_better(&self) -> bool {
        !matches!(self, MetricKind::UniqueNgrams | MetricKind::Bleu)
    }

    pub fn parse(text: &str) -> Result<MetricKind> {
        match text.trim().to_ascii_lowercase().as_str() {
            "unique_4grams" | "unique" | "ngrams" => Ok(MetricKind::UniqueNgrams),
            "bleu4" | "bleu" => Ok(MetricKind::Bleu),
            "self_bleu4" | "self_bleu" | "selfbleu" => Ok(MetricKind::SelfBleu),
            "fd" => Ok(MetricKind::Fd),
            "lm_score" | "lmscore" | "lm" => Ok(MetricKind::LmScore),
            "reverse_lm_score" | "revlmscore" | "revlm" => Ok(MetricKind::ReverseLmScore),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }

    /// Parses a comma-separated selection like `fd,bleu,revlm`.
    pub fn parse_list(text: &str) -> Result<Vec<MetricKind>> {
        let mut out = Vec::new();
        for part in text.split(',') {
            let kind = MetricKind::parse(part)?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("empty metric selection".into()));
        }
        Ok(out)
    }
}

/// Knobs of the metric backends used by the engine.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub bleu: BleuConfig,
    /// Order used by the unique n-gram count.
    pub ngram_order: usize,
    pub embedder: HashEmbedderConfig,
    pub lm_order: usize,
    pub lm_min_count: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            bleu: BleuConfig::default(),
            ngram_order: 4,
            embedder: HashEmbedderConfig::default(),
            lm_order: 4,
            lm_min_count: 1,
        }
    }
}

/// Evaluates sample sets against a fixed reference and held-out corpus.
/// Reference-side resources are built once in [`MetricEngine::prepare`] and
/// shared by every subsequent [`MetricEngine::compute`] call.
pub struct MetricEngine {
    reference: Corpus,
    heldout: Corpus,
    cfg: EngineConfig,
    bleu_scorer: Option<BleuScorer>,
    reference_stats: Option<GaussianStats>,
    real_lm: Option<NGramModel>,
}

impl MetricEngine {
    pub fn new(reference: Corpus, heldout: Corpus, cfg: EngineConfig) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::InvalidInput("reference corpus is empty".into()));
        }
        if heldout.is_empty() {
            return Err(Error::InvalidInput("held-out corpus is empty".into()));
        }
        Ok(MetricEngine {
            reference,
            heldout,
            cfg,
            bleu_scorer: None,
            reference_stats: None,
            real_lm: None,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn reference(&self) -> &Corpus {
        &self.reference
    }

    /// Builds the reference-side resources the selection needs.
    pub fn prepare(&mut self, selection: &[MetricKind]) -> Result<()> {
        if selection.contains(&MetricKind::Bleu) && self.bleu_scorer.is_none() {
            self.bleu_scorer = Some(BleuScorer::new(&self.reference, self.cfg.bleu.clone())?);
        }
        if selection.contains(&MetricKind::Fd) && self.reference_stats.is_none() {
            let embeddings = hash_embed_corpus(&self.reference, &self.cfg.embedder)?;
            self.reference_stats = Some(fit_gaussian(&embeddings)?);
        }
        if selection.contains(&MetricKind::LmScore) && self.real_lm.is_none() {
            self.real_lm = Some(train_lm(
                &self.reference,
                self.cfg.lm_order,
                self.cfg.lm_min_count,
            )?);
        }
        Ok(())
    }

    /// Computes the selected metrics for a sample set. `second_samples`
    /// provides the second draw for self-BLEU; without it the samples are
    /// split in half with a seed derived from `seed`. Returns the metric
    /// values plus any numerical notes (jitter, fallbacks).
    pub fn compute(
        &self,
        selection: &[MetricKind],
        samples: &Corpus,
        second_samples: Option<&Corpus>,
        seed: RngSeed,
    ) -> Result<(BTreeMap<String, f64>, Vec<String>)> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("sample corpus is empty".into()));
        }
        let mut values = BTreeMap::new();
        let mut notes = Vec::new();
        for metric in selection {
            let value = match metric {
                MetricKind::UniqueNgrams => unique_ngrams(samples, self.cfg.ngram_order)? as f64,
                MetricKind::Bleu => {
                    let scorer = self.bleu_scorer.as_ref().ok_or_else(|| {
                        Error::InvalidArgument("engine not prepared for bleu4".into())
                    })?;
                    scorer.score(samples)?.bleu
                }
                MetricKind::SelfBleu => match second_samples {
                    Some(second) => crate::ngram::self_bleu(samples, second, &self.cfg.bleu)?,
                    None => {
                        if samples.len() < 2 {
                            return Err(Error::InvalidInput(
                                "self-BLEU needs at least 2 samples to split".into(),
                            ));
                        }
                        notes.push("self_bleu4: split-half fallback".into());
                        let (a, b) = split_corpus(samples, 0.5, derive_seed(seed, 0))?;
                        crate::ngram::self_bleu(&a, &b, &self.cfg.bleu)?
                    }
                },
                MetricKind::Fd => {
                    let reference_stats = self.reference_stats.as_ref().ok_or_else(|| {
                        Error::InvalidArgument("engine not prepared for fd".into())
                    })?;
                    let embeddings = hash_embed_corpus(samples, &self.cfg.embedder)?;
                    let stats = fit_gaussian(&embeddings)?;
                    let report = frechet_distance_report(reference_stats, &stats)?;
                    if let Some(eps) = report.jitter {
                        notes.push(format!("fd: jitter {eps:e} applied"));
                    }
                    if report.clamped {
                        notes.push(format!("fd: clamped raw value {:e}", report.raw));
                    }
                    report.fd
                }
                MetricKind::LmScore => {
                    let model = self.real_lm.as_ref().ok_or_else(|| {
                        Error::InvalidArgument("engine not prepared for lm_score".into())
                    })?;
                    lm_score(model, samples)?.per_token_ppl
                }
                MetricKind::ReverseLmScore => {
                    reverse_lm_score(
                        samples,
                        &self.heldout,
                        self.cfg.lm_order,
                        self.cfg.lm_min_count,
                    )?
                    .per_token_ppl
                }
            };
            values.insert(metric.name().to_string(), value);
        }
        Ok((values, notes))
    }
}
