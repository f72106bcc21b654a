//! Machine-readable verification reports.
//!
//! Everything in a report is a pure function of (suite, seed, samples,
//! tolerance table) except `timestamp`, which is the single metadata field
//! consumers must ignore when comparing runs.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub residual: f64,
    pub gate: f64,
    pub pass: bool,
}

impl PropertyResult {
    pub fn new(name: &str, residual: f64, gate: f64) -> PropertyResult {
        PropertyResult {
            name: name.to_string(),
            residual,
            gate,
            pass: residual <= gate,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub properties: Vec<PropertyResult>,
    pub pass: bool,
    pub timestamp: String,
}

impl SuiteReport {
    pub fn new(
        suite: &str,
        seed: u64,
        samples: usize,
        tolerances: BTreeMap<String, f64>,
        properties: Vec<PropertyResult>,
    ) -> SuiteReport {
        let pass = properties.iter().all(|p| p.pass);
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default();
        SuiteReport {
            suite: suite.to_string(),
            seed,
            samples,
            tolerances,
            properties,
            pass,
            timestamp,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is total")
    }
}
