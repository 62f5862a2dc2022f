use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::grid_fields::io::read_csv;

/// Scalar outputs of a run. Non-finite values (log-domain quantities of a
/// vanishing field, unbounded brackets) are stored as the strings `"inf"`,
/// `"-inf"` and `"nan"`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics(pub BTreeMap<String, f64>);

impl Metrics {
    pub fn insert(&mut self, key: impl Into<String>, value: f64) {
        self.0.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    /// Bitwise equality, so that `NaN` entries compare equal to themselves.
    pub fn bit_identical(&self, other: &Metrics) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|((ka, a), (kb, b))| ka == kb && a.to_bits() == b.to_bits())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MetricRepr {
    Number(f64),
    Text(String),
}

impl Serialize for Metrics {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr: BTreeMap<&str, MetricRepr> = self
            .0
            .iter()
            .map(|(k, &v)| {
                let r = if v.is_finite() {
                    MetricRepr::Number(v)
                } else if v.is_nan() {
                    MetricRepr::Text("nan".into())
                } else if v > 0.0 {
                    MetricRepr::Text("inf".into())
                } else {
                    MetricRepr::Text("-inf".into())
                };
                (k.as_str(), r)
            })
            .collect();
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Metrics {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = BTreeMap::<String, MetricRepr>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for (k, r) in repr {
            let v = match r {
                MetricRepr::Number(x) => x,
                MetricRepr::Text(t) => match t.as_str() {
                    "inf" => f64::INFINITY,
                    "-inf" => f64::NEG_INFINITY,
                    "nan" => f64::NAN,
                    other => return Err(serde::de::Error::custom(format!("metric {k}: bad value {other:?}"))),
                },
            };
            out.insert(k, v);
        }
        Ok(Metrics(out))
    }
}

/// Manifest of one run, written as `manifest.json` in the run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: Experiment,
    pub config_hash: String,
    pub seed: u64,
    /// Unix time in seconds.
    pub started_at: f64,
    pub finished_at: f64,
    /// False when the pipeline stopped early; `error` then says why.
    pub complete: bool,
    pub error: Option<String>,
    pub metrics: Metrics,
    /// Artifact file names relative to the run directory.
    pub artifacts: Vec<String>,
    pub config: ExperimentConfig,
}

pub const MANIFEST: &str = "manifest.json";

impl RunRecord {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        std::fs::write(run_dir.join(MANIFEST), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Checks that every listed artifact exists and that every CSV carries
    /// the run's config hash.
    pub fn check_artifacts(&self, run_dir: &Path) -> Result<()> {
        for name in &self.artifacts {
            let path = run_dir.join(name);
            if !path.is_file() {
                return Err(Error::Serde(format!("artifact {name} is missing")));
            }
            if name.ends_with(".csv") {
                let (hash, _, _) = read_csv(&path)?;
                if hash != self.config_hash {
                    return Err(Error::Serde(format!(
                        "{name} carries config hash {hash}, manifest has {}",
                        self.config_hash
                    )));
                }
            }
        }
        Ok(())
    }

    /// Plain-text summary of the run.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "experiment {}  hash {}  seed {}  {}\n",
            self.experiment,
            &self.config_hash[..12.min(self.config_hash.len())],
            self.seed,
            if self.complete { "complete" } else { "INCOMPLETE" }
        );
        if let Some(e) = &self.error {
            s.push_str(&format!("error: {e}\n"));
        }
        let width = self.metrics.0.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in &self.metrics.0 {
            s.push_str(&format!("  {k:<width$}  {v:.6e}\n"));
        }
        for a in &self.artifacts {
            s.push_str(&format!("  -> {a}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_metrics_round_trip() {
        let mut m = Metrics::default();
        m.insert("a", 1.5);
        m.insert("b", f64::NEG_INFINITY);
        m.insert("c", f64::INFINITY);
        m.insert("d", f64::NAN);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"a":1.5,"b":"-inf","c":"inf","d":"nan"}"#);
        let back: Metrics = serde_json::from_str(&json).unwrap();
        assert!(back.bit_identical(&m));
        assert!(serde_json::from_str::<Metrics>(r#"{"a":"big"}"#).is_err());
    }

    #[test]
    fn json_round_trip_preserves_bits() {
        let mut m = Metrics::default();
        for (i, x) in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, -7.25e17].into_iter().enumerate() {
            m.insert(format!("k{i}"), x);
        }
        let back: Metrics = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert!(back.bit_identical(&m));
    }
}
