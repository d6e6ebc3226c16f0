use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Outcome of one statistical or numerical check.
///
/// `pass` is always `statistic <= threshold`; a NaN statistic fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub n_samples: usize,
    pub pass: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, n_samples: usize) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            n_samples,
            pass: statistic <= threshold,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn insert_meta(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
