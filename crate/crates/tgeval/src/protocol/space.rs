//! Hyperparameter space definition and random sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngSeed, SplitMix64};

/// A sampled parameter value: number or string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            ParamValue::Str(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Str(s) => write!(f, "{s}"),
        }
    }
}

/// Name -> value map of one sampled configuration.
pub type ParamMap = BTreeMap<String, ParamValue>;

/// One dimension of the search space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceEntry {
    /// Uniform on [low, high).
    UniformReal { name: String, low: f64, high: f64 },
    /// exp(uniform(ln low, ln high)); bounds must be positive.
    LogUniformReal { name: String, low: f64, high: f64 },
    /// Uniform over an explicit list.
    Choice {
        name: String,
        choices: Vec<ParamValue>,
    },
}

impl SpaceEntry {
    pub fn name(&self) -> &str {
        match self {
            SpaceEntry::UniformReal { name, .. }
            | SpaceEntry::LogUniformReal { name, .. }
            | SpaceEntry::Choice { name, .. } => name,
        }
    }
}

/// An ordered list of uniquely named search dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperparamSpace {
    pub entries: Vec<SpaceEntry>,
}

impl HyperparamSpace {
    pub fn new(entries: Vec<SpaceEntry>) -> Result<Self> {
        let space = HyperparamSpace { entries };
        space.validate()?;
        Ok(space)
    }

    /// Loads a JSON array of entries, e.g.
    /// `[{"name":"dropout","kind":"uniform_real","low":0,"high":1}]`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let space: HyperparamSpace = serde_json::from_str(&text)
            .map_err(|e| Error::format(path, e.line(), e.to_string()))?;
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for entry in &self.entries {
            if !names.insert(entry.name().to_string()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate parameter name {:?}",
                    entry.name()
                )));
            }
            match entry {
                SpaceEntry::UniformReal { name, low, high } => {
                    if !(low.is_finite() && high.is_finite() && low < high) {
                        return Err(Error::InvalidArgument(format!(
                            "bad bounds [{low}, {high}) for {name:?}"
                        )));
                    }
                }
                SpaceEntry::LogUniformReal { name, low, high } => {
                    if !(low.is_finite() && high.is_finite() && *low > 0.0 && low < high) {
                        return Err(Error::InvalidArgument(format!(
                            "log-uniform bounds for {name:?} must satisfy 0 < low < high, \
                             got [{low}, {high})"
                        )));
                    }
                }
                SpaceEntry::Choice { name, choices } => {
                    if choices.is_empty() {
                        return Err(Error::InvalidArgument(format!(
                            "empty choice list for {name:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One independent draw per entry, in declared order, deterministic in the
/// seed.
pub fn sample_params(space: &HyperparamSpace, seed: RngSeed) -> Result<ParamMap> {
    space.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut params = ParamMap::new();
    for entry in &space.entries {
        let value = match entry {
            SpaceEntry::UniformReal { low, high, .. } => {
                ParamValue::Number(rng.uniform(*low, *high))
            }
            SpaceEntry::LogUniformReal { low, high, .. } => {
                ParamValue::Number(rng.uniform(low.ln(), high.ln()).exp())
            }
            SpaceEntry::Choice { choices, .. } => choices[rng.below(choices.len())].clone(),
        };
        params.insert(entry.name().to_string(), value);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(name: &str, low: f64, high: f64) -> SpaceEntry {
        SpaceEntry::UniformReal {
            name: name.into(),
            low,
            high,
        }
    }

    #[test]
    fn single_choice_is_constant() {
        let space = HyperparamSpace::new(vec![SpaceEntry::Choice {
            name: "opt".into(),
            choices: vec![ParamValue::Str("adam".into())],
        }])
        .unwrap();
        for seed in 0..20 {
            let params = sample_params(&space, RngSeed(seed)).unwrap();
            assert_eq!(params["opt"], ParamValue::Str("adam".into()));
        }
    }

    #[test]
    fn uniform_draws_concentrate() {
        let space = HyperparamSpace::new(vec![uniform("x", 0.0, 1.0)]).unwrap();
        let n = 10_000;
        let mut sum = 0.0;
        for seed in 0..n {
            sum += sample_params(&space, RngSeed(seed)).unwrap()["x"]
                .as_f64()
                .unwrap();
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn log_uniform_stays_in_bounds() {
        let space = HyperparamSpace::new(vec![SpaceEntry::LogUniformReal {
            name: "lr".into(),
            low: 1e-5,
            high: 1e-1,
        }])
        .unwrap();
        for seed in 0..200 {
            let v = sample_params(&space, RngSeed(seed)).unwrap()["lr"]
                .as_f64()
                .unwrap();
            assert!((1e-5..1e-1).contains(&v), "lr {v}");
        }
    }

    #[test]
    fn same_seed_same_draw() {
        let space = HyperparamSpace::new(vec![
            uniform("a", -1.0, 1.0),
            SpaceEntry::LogUniformReal {
                name: "b".into(),
                low: 0.1,
                high: 10.0,
            },
        ])
        .unwrap();
        assert_eq!(
            sample_params(&space, RngSeed(99)).unwrap(),
            sample_params(&space, RngSeed(99)).unwrap()
        );
    }

    #[test]
    fn validation_rejects_bad_spaces() {
        assert!(HyperparamSpace::new(vec![uniform("a", 1.0, 0.0)]).is_err());
        assert!(
            HyperparamSpace::new(vec![uniform("a", 0.0, 1.0), uniform("a", 0.0, 1.0)]).is_err()
        );
        assert!(HyperparamSpace::new(vec![SpaceEntry::LogUniformReal {
            name: "lr".into(),
            low: 0.0,
            high: 1.0,
        }])
        .is_err());
        assert!(HyperparamSpace::new(vec![SpaceEntry::Choice {
            name: "c".into(),
            choices: vec![],
        }])
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"[
            {"name": "dropout", "kind": "uniform_real", "low": 0.0, "high": 1.0},
            {"name": "arch", "kind": "choice", "choices": ["lstm", "conv"]}
        ]"#;
        let space: HyperparamSpace = serde_json::from_str(text).unwrap();
        space.validate().unwrap();
        assert_eq!(space.entries.len(), 2);
        let back = serde_json::to_string(&space).unwrap();
        let again: HyperparamSpace = serde_json::from_str(&back).unwrap();
        assert_eq!(again.entries.len(), 2);
    }
}
