//! The comparison protocol: random-search hyperparameter tuning of a
//! system-under-evaluation, replication of the best configuration, and
//! mean +/- std aggregation, persisted through an append-only JSONL store.

mod model;
mod record;
mod report;
mod search;
mod space;
mod store;

pub use model::{Model, ModelSpec};
pub use record::{aggregate_records, AggregateReport, MetricStat, TrialRecord, TrialStatus};
pub use report::{render_report, ReportFormat};
pub use search::{random_search, replicate_best, run_trial, SearchConfig, SearchResult};
pub use space::{sample_params, HyperparamSpace, ParamMap, ParamValue, SpaceEntry};
pub use store::RunStore;
