use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// One measured quantity and the assertion made on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    /// which estimate the prediction or bound comes from
    pub anchor: String,
    pub pass: bool,
}

impl Measurement {
    /// Recorded without an assertion.
    pub fn info(name: impl Into<String>, value: f64, anchor: impl Into<String>) -> Self {
        Self { name: name.into(), value, predicted: None, lower: None, upper: None, anchor: anchor.into(), pass: true }
    }

    pub fn at_most(name: impl Into<String>, value: f64, upper: f64, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            predicted: None,
            lower: None,
            upper: Some(upper),
            anchor: anchor.into(),
            pass: value <= upper,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, lower: f64, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            predicted: None,
            lower: Some(lower),
            upper: None,
            anchor: anchor.into(),
            pass: value >= lower,
        }
    }

    /// `|value - predicted| <= rel * |predicted|`.
    pub fn near(name: impl Into<String>, value: f64, predicted: f64, rel: f64, anchor: impl Into<String>) -> Self {
        let tol = rel * predicted.abs();
        Self {
            name: name.into(),
            value,
            predicted: Some(predicted),
            lower: Some(predicted - tol),
            upper: Some(predicted + tol),
            anchor: anchor.into(),
            pass: (value - predicted).abs() <= tol,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            predicted: None,
            lower: Some(lower),
            upper: Some(upper),
            anchor: anchor.into(),
            pass: value >= lower && value <= upper,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: f64::from(u8::from(ok)),
            predicted: Some(1.0),
            lower: None,
            upper: None,
            anchor: anchor.into(),
            pass: ok,
        }
    }
}

/// A CSV table attached to a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub inputs_hash: String,
    pub pass: bool,
    pub measurements: Vec<Measurement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub tables: BTreeMap<String, Table>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, inputs: &impl Serialize) -> Self {
        let json = serde_json::to_vec(inputs).expect("inputs serialize");
        let check = check.into();
        let mut h = Sha256::new();
        h.update(check.as_bytes());
        h.update(&json);
        Self {
            check,
            inputs_hash: hex::encode(h.finalize()),
            pass: true,
            measurements: Vec::new(),
            notes: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, m: Measurement) {
        self.pass &= m.pass;
        self.measurements.push(m);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn table(&mut self, name: &str, t: Table) {
        self.tables.insert(name.to_string(), t);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `<dir>/<check>.json` plus `<dir>/<check>_<table>.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", self.check)), self.to_json())?;
        for (name, t) in &self.tables {
            std::fs::write(dir.join(format!("{}_{name}.csv", self.check)), t.to_csv())?;
        }
        Ok(())
    }
}

/// Wall-clock times, kept out of reports so those stay reproducible.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: BTreeMap<String, f64>,
}

impl Timings {
    pub fn record(&mut self, name: &str, secs: f64) {
        *self.seconds.entry(name.to_string()).or_default() += secs;
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("timings.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Format a float for CSV cells.
pub fn fmt(v: f64) -> String {
    format!("{v:e}")
}
