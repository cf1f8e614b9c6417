//! Random search, best-configuration replication and trial execution.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::metrics::{MetricEngine, MetricKind};
use crate::protocol::model::Model;
use crate::protocol::record::{
    aggregate_records, AggregateReport, TrialRecord, TrialStatus, TRIAL_SCHEMA,
};
use crate::protocol::space::{sample_params, HyperparamSpace, ParamMap};
use crate::protocol::store::RunStore;
use crate::rng::{derive_seed, RngSeed};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub budget: usize,
    pub objective: MetricKind,
    /// Metrics computed per trial; must include the objective.
    pub metrics: Vec<MetricKind>,
    /// Samples requested from the model per trial.
    pub sample_n: usize,
    pub seed: RngSeed,
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidArgument("search budget must be >= 1".into()));
        }
        if self.sample_n == 0 {
            return Err(Error::InvalidArgument("sample_n must be >= 1".into()));
        }
        if !self.metrics.contains(&self.objective) {
            return Err(Error::InvalidArgument(format!(
                "metric selection must include the objective {:?}",
                self.objective.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: TrialRecord,
    pub trials: Vec<TrialRecord>,
}

/// Runs one trial: pulls samples from the model, computes the selected
/// metrics, and records the outcome. Model and metric failures yield a
/// failed record instead of an error so searches keep going.
pub fn run_trial(
    model: &Model,
    engine: &MetricEngine,
    metrics: &[MetricKind],
    sample_n: usize,
    trial_id: u64,
    params: ParamMap,
    seed: RngSeed,
) -> TrialRecord {
    let started = Instant::now();
    let mut record = TrialRecord {
        schema: TRIAL_SCHEMA.into(),
        trial_id,
        params,
        seed: seed.0,
        metrics: BTreeMap::new(),
        status: TrialStatus::Ok,
        wall_time: 0.0,
        notes: Vec::new(),
    };

    let outcome = (|| -> std::result::Result<(), (TrialStatus, String)> {
        let samples = model
            .generate(&record.params, sample_n, derive_seed(seed, 0))
            .map_err(|e| (TrialStatus::ModelFailed, e.to_string()))?;
        // Self-BLEU needs an independent second draw from the same model.
        let second = if metrics.contains(&MetricKind::SelfBleu) {
            Some(
                model
                    .generate(&record.params, sample_n, derive_seed(seed, 1))
                    .map_err(|e| (TrialStatus::ModelFailed, e.to_string()))?,
            )
        } else {
            None
        };
        let (values, notes) = engine
            .compute(metrics, &samples, second.as_ref(), derive_seed(seed, 2))
            .map_err(|e| (TrialStatus::MetricFailed, e.to_string()))?;
        if let Some((name, value)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err((
                TrialStatus::MetricFailed,
                format!("metric {name} is not finite: {value}"),
            ));
        }
        record.metrics = values;
        record.notes.extend(notes);
        Ok(())
    })();

    if let Err((status, message)) = outcome {
        record.status = status;
        record.metrics.clear();
        record.notes.push(message);
    }
    record.wall_time = started.elapsed().as_secs_f64();
    record
}

/// The objective value normalized so that lower always wins.
fn normalized_objective(record: &TrialRecord, objective: MetricKind) -> Option<f64> {
    let raw = record.metrics.get(objective.name())?;
    Some(if objective.lower_is_better() {
        *raw
    } else {
        -*raw
    })
}

/// Random search over the space within a fixed trial budget. Per-trial
/// seeds derive from the master seed, so results do not depend on
/// execution order; trials run sequentially and are appended to the store
/// as they complete.
pub fn random_search(
    model: &Model,
    space: &HyperparamSpace,
    engine: &MetricEngine,
    cfg: &SearchConfig,
    store: Option<&RunStore>,
) -> Result<SearchResult> {
    cfg.validate()?;
    space.validate()?;

    let mut trials = Vec::with_capacity(cfg.budget);
    for trial_id in 0..cfg.budget as u64 {
        let trial_seed = derive_seed(cfg.seed, trial_id);
        let params = sample_params(space, derive_seed(trial_seed, 0))?;
        let record = run_trial(
            model,
            engine,
            &cfg.metrics,
            cfg.sample_n,
            trial_id,
            params,
            derive_seed(trial_seed, 1),
        );
        if let Some(store) = store {
            store.append(&record)?;
        }
        if record.status != TrialStatus::Ok {
            log::warn!(
                "trial {trial_id} {:?}: {}",
                record.status,
                record.notes.last().map(String::as_str).unwrap_or("")
            );
        }
        trials.push(record);
    }

    let best = trials
        .iter()
        .filter_map(|t| normalized_objective(t, cfg.objective).map(|v| (t, v)))
        .min_by(|(a, va), (b, vb)| {
            va.partial_cmp(vb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.trial_id.cmp(&b.trial_id))
        })
        .map(|(t, _)| t.clone());

    match best {
        Some(best) => Ok(SearchResult { best, trials }),
        None => Err(Error::SearchFailed {
            message: format!("all {} trials failed", cfg.budget),
            records: trials,
        }),
    }
}

/// Reruns the best configuration with fresh derived seeds and aggregates
/// per-metric mean and standard deviation over the ok replicas.
#[allow(clippy::too_many_arguments)]
pub fn replicate_best(
    model: &Model,
    best_params: &ParamMap,
    replicas: usize,
    engine: &MetricEngine,
    metrics: &[MetricKind],
    sample_n: usize,
    seed: RngSeed,
    store: Option<&RunStore>,
    label: &str,
) -> Result<AggregateReport> {
    if replicas < 2 {
        return Err(Error::InvalidArgument(
            "replication needs at least 2 replicas".into(),
        ));
    }
    let mut records = Vec::with_capacity(replicas);
    for replica in 0..replicas as u64 {
        let record = run_trial(
            model,
            engine,
            metrics,
            sample_n,
            replica,
            best_params.clone(),
            derive_seed(seed, replica),
        );
        if let Some(store) = store {
            store.append(&record)?;
        }
        records.push(record);
    }
    let ok = records.iter().filter(|r| r.is_ok()).count();
    if ok < 2 {
        return Err(Error::SearchFailed {
            message: format!("only {ok} of {replicas} replicas succeeded"),
            records,
        });
    }
    aggregate_records(label, best_params.clone(), records)
}
