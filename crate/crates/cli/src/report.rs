//! Report files.
//!
//! Reports are JSON objects with sorted keys. Floats are rounded to twelve
//! significant digits before printing, so identical runs give identical
//! bytes. Wall-clock time is only included on request.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

pub const REPORT_VERSION: u32 = 1;
const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Certified,
    Violated,
    Inconclusive,
    Ok,
    Error,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Certified | Outcome::Ok => 0,
            Outcome::Violated => 1,
            Outcome::Inconclusive => 2,
            Outcome::Error => 3,
        }
    }

    pub fn from_verdict(v: lpvcert_core::pbh::Verdict) -> Self {
        use lpvcert_core::pbh::Verdict;
        match v {
            Verdict::Certified => Outcome::Certified,
            Verdict::Violated => Outcome::Violated,
            Verdict::Inconclusive => Outcome::Inconclusive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub report_version: u32,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    /// Effective option values, defaults included.
    pub settings: BTreeMap<String, Value>,
    pub outcome: Outcome,
    pub exit_code: i32,
    pub result: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl Report {
    pub fn new(command: &str, system: Option<String>) -> Self {
        Self {
            tool: format!("lpvcert {}", env!("CARGO_PKG_VERSION")),
            report_version: REPORT_VERSION,
            command: command.to_string(),
            system,
            settings: BTreeMap::new(),
            outcome: Outcome::Ok,
            exit_code: 0,
            result: Value::Null,
            notes: Vec::new(),
            elapsed_ms: None,
        }
    }

    pub fn set<T: Serialize>(&mut self, key: &str, value: T) {
        self.settings
            .insert(key.to_string(), serde_json::to_value(value).expect("setting serializes"));
    }

    pub fn finish<T: Serialize>(&mut self, outcome: Outcome, result: &T) {
        self.outcome = outcome;
        self.exit_code = outcome.exit_code();
        self.result = serde_json::to_value(result).expect("result serializes");
    }

    /// Canonical JSON text, newline-terminated.
    pub fn to_json(&self) -> String {
        let v = canonical(serde_json::to_value(self).expect("report serializes"));
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({})", self.command, self.tool);
        if let Some(s) = &self.system {
            let _ = writeln!(out, "system: {s}");
        }
        let _ = writeln!(out, "outcome: {} (exit {})", outcome_name(self.outcome), self.exit_code);
        if !self.settings.is_empty() {
            let _ = writeln!(out, "settings:");
            for (k, v) in &self.settings {
                let _ = writeln!(out, "  {k} = {}", scalar_text(v));
            }
        }
        if let Value::Object(map) = canonical(self.result.clone()) {
            let _ = writeln!(out, "result:");
            for (k, v) in &map {
                if !v.is_object() && !v.is_array() {
                    let _ = writeln!(out, "  {k} = {}", scalar_text(v));
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        if let Some(ms) = self.elapsed_ms {
            let _ = writeln!(out, "elapsed: {ms:.1} ms");
        }
        out
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Certified => "certified",
        Outcome::Violated => "violated",
        Outcome::Inconclusive => "inconclusive",
        Outcome::Ok => "ok",
        Outcome::Error => "error",
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Rounds a float to the report precision.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every non-integer number in `v`.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}
