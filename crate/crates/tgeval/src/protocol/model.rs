//! The system-under-evaluation: "produce N samples given params and a
//! seed". Training is the model's own business; this interface only pulls
//! samples, either from the builtin synthetic sampler or from an external
//! command.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::corpus::{tokenize, Corpus};
use crate::error::{Error, Result};
use crate::perturb::{synthetic_sampler, PerturbationConfig};
use crate::protocol::space::ParamMap;
use crate::rng::RngSeed;

/// How to resolve the model, as given on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    /// `builtin:synthetic` - bootstrap resampling of the reference corpus,
    /// deteriorated by the `dropout` and `swap` parameters.
    BuiltinSynthetic,
    /// `cmd:PATH` - external command following the sampling protocol.
    External(PathBuf),
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<ModelSpec> {
        if text == "builtin:synthetic" {
            Ok(ModelSpec::BuiltinSynthetic)
        } else if let Some(path) = text.strip_prefix("cmd:") {
            if path.is_empty() {
                return Err(Error::InvalidArgument(
                    "empty command path in `cmd:`".into(),
                ));
            }
            Ok(ModelSpec::External(PathBuf::from(path)))
        } else {
            Err(Error::InvalidArgument(format!(
                "model must be `builtin:synthetic` or `cmd:PATH`, got {text:?}"
            )))
        }
    }
}

/// A resolved sample model.
pub enum Model {
    Synthetic { source: Corpus },
    External { command: PathBuf, timeout: Duration },
}

impl Model {
    pub fn from_spec(spec: &ModelSpec, source: &Corpus, timeout: Duration) -> Model {
        match spec {
            ModelSpec::BuiltinSynthetic => Model::Synthetic {
                source: source.clone(),
            },
            ModelSpec::External(command) => Model::External {
                command: command.clone(),
                timeout,
            },
        }
    }

    /// Obtains `n` samples under `params`. Failures of any kind come back
    /// as [`Error::ModelFailed`] so a search can contain them.
    pub fn generate(&self, params: &ParamMap, n: usize, seed: RngSeed) -> Result<Corpus> {
        match self {
            Model::Synthetic { source } => {
                let dropout = numeric_param(params, "dropout")?.unwrap_or(0.0);
                let swap = numeric_param(params, "swap")?.unwrap_or(0.0);
                let cfg = PerturbationConfig {
                    dropout_p: dropout,
                    swap_fraction: swap,
                    seed,
                };
                synthetic_sampler(source, &cfg, n)
                    .map_err(|e| Error::ModelFailed(format!("synthetic sampler: {e}")))
            }
            Model::External { command, timeout } => {
                run_external(command, *timeout, params, n, seed)
            }
        }
    }
}

fn numeric_param(params: &ParamMap, name: &str) -> Result<Option<f64>> {
    match params.get(name) {
        None => Ok(None),
        Some(value) => value.as_f64().map(Some).ok_or_else(|| {
            Error::ModelFailed(format!("parameter {name:?} must be numeric, got {value}"))
        }),
    }
}

static INVOCATION: AtomicU64 = AtomicU64::new(0);

/// Invokes `<cmd> <params.json> <output_samples.txt>`. The params file is a
/// flat JSON object of the sampled parameters plus the reserved keys `seed`
/// and `n_samples`. The model must write one sample per line and exit 0
/// within the timeout.
fn run_external(
    command: &Path,
    timeout: Duration,
    params: &ParamMap,
    n: usize,
    seed: RngSeed,
) -> Result<Corpus> {
    let invocation = INVOCATION.fetch_add(1, Ordering::Relaxed);
    let dir =
        std::env::temp_dir().join(format!("tgeval-model-{}-{invocation}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let result = run_external_in(&dir, command, timeout, params, n, seed);
    let _ = fs::remove_dir_all(&dir);
    result
}

fn run_external_in(
    dir: &Path,
    command: &Path,
    timeout: Duration,
    params: &ParamMap,
    n: usize,
    seed: RngSeed,
) -> Result<Corpus> {
    let params_path = dir.join("params.json");
    let output_path = dir.join("output_samples.txt");

    let mut object = serde_json::Map::new();
    for (name, value) in params {
        let json = match value {
            crate::protocol::ParamValue::Number(v) => serde_json::json!(v),
            crate::protocol::ParamValue::Str(s) => serde_json::json!(s),
        };
        object.insert(name.clone(), json);
    }
    object.insert("seed".into(), serde_json::json!(seed.0));
    object.insert("n_samples".into(), serde_json::json!(n));
    let body = serde_json::to_string(&serde_json::Value::Object(object))
        .expect("params serialize to JSON");
    fs::write(&params_path, body).map_err(|e| Error::io(&params_path, e))?;

    let mut child = Command::new(command)
        .arg(&params_path)
        .arg(&output_path)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::ModelFailed(format!("failed to spawn {}: {e}", command.display())))?;

    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if started.elapsed() >= timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::ModelFailed(format!(
                        "{} timed out after {:?}",
                        command.display(),
                        timeout
                    )));
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => {
                return Err(Error::ModelFailed(format!(
                    "waiting on {}: {e}",
                    command.display()
                )))
            }
        }
    };

    let stderr = child
        .stderr
        .take()
        .and_then(|mut s| {
            use std::io::Read;
            let mut buf = String::new();
            s.read_to_string(&mut buf).ok().map(|_| buf)
        })
        .unwrap_or_default();

    if !status.success() {
        let excerpt: String = stderr.chars().take(500).collect();
        return Err(Error::ModelFailed(format!(
            "{} exited with {status}: {excerpt}",
            command.display()
        )));
    }

    let text = fs::read_to_string(&output_path).map_err(|e| {
        Error::ModelFailed(format!(
            "model wrote no readable output at {}: {e}",
            output_path.display()
        ))
    })?;
    // One sample per line; an empty line is an empty sample.
    let sentences: Vec<_> = text.lines().map(tokenize).collect();
    if sentences.len() != n {
        return Err(Error::ModelFailed(format!(
            "model wrote {} samples, expected {n}",
            sentences.len()
        )));
    }
    Ok(Corpus::new(sentences))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ParamValue;

    fn corpus_of(lines: &[&str]) -> Corpus {
        Corpus::new(lines.iter().map(|l| tokenize(l)).collect())
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "builtin:synthetic".parse::<ModelSpec>().unwrap(),
            ModelSpec::BuiltinSynthetic
        );
        assert_eq!(
            "cmd:/bin/true".parse::<ModelSpec>().unwrap(),
            ModelSpec::External(PathBuf::from("/bin/true"))
        );
        assert!("external".parse::<ModelSpec>().is_err());
        assert!("cmd:".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn synthetic_model_samples_deterministically() {
        let source = corpus_of(&["a b c d", "e f g h", "i j k l"]);
        let model = Model::Synthetic { source };
        let mut params = ParamMap::new();
        params.insert("dropout".into(), ParamValue::Number(0.2));
        params.insert("swap".into(), ParamValue::Number(0.1));
        let a = model.generate(&params, 25, RngSeed(5)).unwrap();
        let b = model.generate(&params, 25, RngSeed(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 25);
    }

    #[test]
    fn synthetic_model_rejects_non_numeric_rates() {
        let model = Model::Synthetic {
            source: corpus_of(&["a b"]),
        };
        let mut params = ParamMap::new();
        params.insert("dropout".into(), ParamValue::Str("high".into()));
        assert!(matches!(
            model.generate(&params, 2, RngSeed(0)),
            Err(Error::ModelFailed(_))
        ));
    }

    #[cfg(unix)]
    #[test]
    fn external_failure_is_contained() {
        let model = Model::External {
            command: PathBuf::from("/bin/false"),
            timeout: Duration::from_secs(5),
        };
        let err = model.generate(&ParamMap::new(), 3, RngSeed(0)).unwrap_err();
        assert!(matches!(err, Error::ModelFailed(_)));
    }

    #[cfg(unix)]
    #[test]
    fn external_missing_command_is_contained() {
        let model = Model::External {
            command: PathBuf::from("/no/such/command"),
            timeout: Duration::from_secs(5),
        };
        assert!(matches!(
            model.generate(&ParamMap::new(), 3, RngSeed(0)),
            Err(Error::ModelFailed(_))
        ));
    }
}
