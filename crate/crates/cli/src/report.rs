//! Check records, suite and run reports.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ToleranceProfile;

pub const SCHEMA_VERSION: u32 = 1;

/// Direction of a check against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Pass when `residual ≤ tolerance`.
    Upper,
    /// Pass when `residual ≥ tolerance`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub op: String,
    pub inputs: Value,
    pub values: Value,
    /// `null` in JSON when the operation failed before producing a residual.
    #[serde(deserialize_with = "nan_if_null")]
    pub residual: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Record {
    pub fn check(op: &str, inputs: Value, values: Value, residual: f64, tolerance: f64) -> Self {
        Self::with_bound(op, inputs, values, residual, tolerance, Bound::Upper)
    }

    pub fn at_least(op: &str, inputs: Value, values: Value, residual: f64, tolerance: f64) -> Self {
        Self::with_bound(op, inputs, values, residual, tolerance, Bound::Lower)
    }

    fn with_bound(op: &str, inputs: Value, values: Value, residual: f64, tolerance: f64, bound: Bound) -> Self {
        let pass = residual.is_finite()
            && match bound {
                Bound::Upper => residual <= tolerance,
                Bound::Lower => residual >= tolerance,
            };
        Self {
            op: op.to_string(),
            inputs,
            values,
            residual,
            tolerance,
            bound,
            pass,
            error: None,
        }
    }

    /// A failed record carrying the error that stopped the operation.
    pub fn failed(op: &str, inputs: Value, error: impl std::fmt::Display) -> Self {
        Self {
            op: op.to_string(),
            inputs,
            values: Value::Null,
            residual: f64::NAN,
            tolerance: f64::NAN,
            bound: Bound::Upper,
            pass: false,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub records: Vec<Record>,
}

impl SuiteReport {
    pub fn new(suite: &str, records: Vec<Record>) -> Self {
        Self {
            suite: suite.to_string(),
            pass: records.iter().all(|r| r.pass),
            records,
        }
    }
}

/// Run metadata that legitimately differs between identical runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    /// Wall-clock milliseconds per suite, in run order.
    pub timing_ms: Vec<(String, f64)>,
    pub cache_hits: Vec<String>,
    pub cache_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub profile: ToleranceProfile,
    pub global_pass: bool,
    pub suites: Vec<SuiteReport>,
    pub run: RunMeta,
}

impl RunReport {
    pub fn new(config_hash: String, seed: u64, profile: ToleranceProfile, suites: Vec<SuiteReport>, run: RunMeta) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config_hash,
            seed,
            profile,
            global_pass: suites.iter().all(|s| s.pass),
            suites,
            run,
        }
    }

    /// The report without run metadata, serialized; identical runs give identical bytes.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(m) = &mut v {
            m.remove("run");
        }
        serde_json::to_string(&v).expect("report serializes")
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.suite == name)
    }

    pub fn record(&self, suite: &str, op: &str) -> Option<&Record> {
        self.suite(suite)?.records.iter().find(|r| r.op == op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn pass_follows_bound() {
        assert!(Record::check("a", json!({}), json!({}), 1e-9, 1e-8).pass);
        assert!(!Record::check("a", json!({}), json!({}), f64::NAN, 1e-8).pass);
        assert!(Record::at_least("b", json!({}), json!({}), 0.9, 0.5).pass);
        assert!(!Record::failed("c", json!({}), "boom").pass);
    }

    #[test]
    fn global_pass_is_conjunction() {
        let ok = SuiteReport::new("x", vec![Record::check("a", json!(1), json!(1), 0.0, 0.0)]);
        let bad = SuiteReport::new("y", vec![Record::failed("b", json!(1), "e")]);
        let r = RunReport::new("h".into(), 0, ToleranceProfile::Strict, vec![ok.clone()], RunMeta::default());
        assert!(r.global_pass);
        let r = RunReport::new("h".into(), 0, ToleranceProfile::Strict, vec![ok, bad], RunMeta::default());
        assert!(!r.global_pass);
    }
}
