//! Versioned machine-readable reports.

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: &str = "hitlace-report/1";

/// One pass/fail check, tagged with the acceptance criterion it gates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    /// Passes when `value <= threshold`.
    pub fn at_most(criterion: u8, name: &'static str, value: f64, threshold: f64) -> Self {
        Verdict { criterion, name, value, threshold, pass: value <= threshold }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(criterion: u8, name: &'static str, value: f64, threshold: f64) -> Self {
        Verdict { criterion, name, value, threshold, pass: value >= threshold }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}
