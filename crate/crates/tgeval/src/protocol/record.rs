//! Trial records and mean +/- std aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::space::ParamMap;

pub const TRIAL_SCHEMA: &str = "trial/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    ModelFailed,
    MetricFailed,
}

/// One tuning trial or replica: sampled parameters, seed, metric values and
/// outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema: String,
    pub trial_id: u64,
    pub params: ParamMap,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub status: TrialStatus,
    /// Wall-clock seconds spent on the trial.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

/// Mean and sample standard deviation (n-1) of one metric over replicas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean +/- std summary across replicas of one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub label: String,
    pub params: ParamMap,
    pub metrics: BTreeMap<String, MetricStat>,
    pub ok_replicas: usize,
    pub failed_replicas: usize,
    pub replicas: Vec<TrialRecord>,
}

/// Aggregates records into per-metric mean and n-1 standard deviation over
/// the ok replicas. Records are ordered by trial id so re-aggregation from
/// a store reproduces the report exactly.
pub fn aggregate_records(
    label: impl Into<String>,
    params: ParamMap,
    records: Vec<TrialRecord>,
) -> Result<AggregateReport> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no trial records to aggregate".into()));
    }
    let mut records = records;
    records.sort_by_key(|r| r.trial_id);

    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let failed = records.len() - ok.len();

    let mut names: Vec<&str> = Vec::new();
    for record in &ok {
        for name in record.metrics.keys() {
            if !names.contains(&name.as_str()) {
                names.push(name);
            }
        }
    }

    let mut metrics = BTreeMap::new();
    for name in names {
        let values: Vec<f64> = ok
            .iter()
            .filter_map(|r| r.metrics.get(name).copied())
            .collect();
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        };
        metrics.insert(name.to_string(), MetricStat { mean, std, n });
    }

    Ok(AggregateReport {
        label: label.into(),
        params,
        metrics,
        ok_replicas: ok.len(),
        failed_replicas: failed,
        replicas: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: u64, status: TrialStatus, value: f64) -> TrialRecord {
        let mut metrics = BTreeMap::new();
        if status == TrialStatus::Ok {
            metrics.insert("fd".to_string(), value);
        }
        TrialRecord {
            schema: TRIAL_SCHEMA.into(),
            trial_id: id,
            params: ParamMap::new(),
            seed: id,
            metrics,
            status,
            wall_time: 0.1,
            notes: Vec::new(),
        }
    }

    #[test]
    fn mean_and_sample_std() {
        // {1, 2, 3} -> mean 2, std 1 under the n-1 convention.
        let records = vec![
            record(0, TrialStatus::Ok, 1.0),
            record(1, TrialStatus::Ok, 2.0),
            record(2, TrialStatus::Ok, 3.0),
        ];
        let report = aggregate_records("m", ParamMap::new(), records).unwrap();
        let stat = &report.metrics["fd"];
        assert_eq!(stat.mean, 2.0);
        assert_eq!(stat.std, 1.0);
        assert_eq!(stat.n, 3);
    }

    #[test]
    fn identical_values_have_zero_std() {
        let records = vec![
            record(0, TrialStatus::Ok, 0.5),
            record(1, TrialStatus::Ok, 0.5),
        ];
        let report = aggregate_records("m", ParamMap::new(), records).unwrap();
        assert_eq!(report.metrics["fd"].std, 0.0);
    }

    #[test]
    fn failed_replicas_are_counted_not_averaged() {
        let records = vec![
            record(0, TrialStatus::Ok, 1.0),
            record(1, TrialStatus::ModelFailed, f64::NAN),
            record(2, TrialStatus::Ok, 3.0),
        ];
        let report = aggregate_records("m", ParamMap::new(), records).unwrap();
        assert_eq!(report.ok_replicas, 2);
        assert_eq!(report.failed_replicas, 1);
        assert_eq!(report.metrics["fd"].mean, 2.0);
    }

    #[test]
    fn aggregation_matches_independent_recomputation() {
        let values = [0.31, 0.29, 0.35, 0.28, 0.33];
        let records: Vec<TrialRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| record(i as u64, TrialStatus::Ok, v))
            .collect();
        let report = aggregate_records("m", ParamMap::new(), records).unwrap();

        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = (ss / (values.len() as f64 - 1.0)).sqrt();
        assert!((report.metrics["fd"].mean - mean).abs() < 1e-12);
        assert!((report.metrics["fd"].std - std).abs() < 1e-12);
    }
}
