//! Machine-readable verification reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One verdict. Non-finite measurements are stored as `f64::MAX` so the JSON
/// form stays numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn finite(x: f64) -> f64 {
    if x.is_nan() {
        f64::MAX
    } else {
        x.clamp(f64::MIN, f64::MAX)
    }
}

impl Record {
    pub fn new(name: impl Into<String>, measured: f64, bound: f64, pass: bool) -> Record {
        Record { name: name.into(), measured: finite(measured), bound: finite(bound), pass, note: None }
    }

    /// Passes when `measured <= bound`.
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Record {
        Record::new(name, measured, bound, measured <= bound)
    }

    /// Passes when `measured >= bound`.
    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Record {
        Record::new(name, measured, bound, measured >= bound)
    }

    /// An exact count or flag comparison.
    pub fn equals(name: impl Into<String>, measured: f64, expected: f64) -> Record {
        Record::new(name, measured, expected, measured == expected)
    }

    /// A module error, recorded as a failed check.
    pub fn failed(name: impl Into<String>, err: &Error) -> Record {
        Record { note: Some(err.to_string()), ..Record::new(name, f64::MAX, 0.0, false) }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Record {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub c_sq_rule: String,
    pub c_sq: Vec<f64>,
    pub delta: f64,
    pub beta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: Option<f64>,
    pub rho_param: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub profile: ProfileSummary,
    pub truncations: Vec<usize>,
    pub sweep_truncations: Vec<usize>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    pub seed: u64,
    pub generator: String,
    pub version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub scenarios: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    records: Vec<Record>,
    pub environment: Environment,
    pub timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Report {
    pub fn new(scenario: impl Into<String>, environment: Environment) -> Report {
        Report { scenario: scenario.into(), records: Vec::new(), environment, timing: Timing::default() }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = Record>) {
        self.records.extend(rs);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Report> {
        serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "measured", "bound", "pass"]).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.records {
            w.write_record([r.name.clone(), r.measured.to_string(), r.bound.to_string(), r.pass.to_string()])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `report.json` or `report.csv` into `dir` and returns its path.
    pub fn emit(&self, dir: &Path, format: Format) -> Result<std::path::PathBuf> {
        fs::create_dir_all(dir)?;
        let (name, text) = match format {
            Format::Json => ("report.json", self.to_json()?),
            Format::Csv => ("report.csv", self.to_csv()?),
        };
        let path = dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}
