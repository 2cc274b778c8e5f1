//! Verdicts and the files every run writes.

use serde::Serialize;
use serde_json::{Map, Value};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail | Status::Inconclusive => 2,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value < tolerance`.
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < tolerance,
            value: Some(value),
            tolerance: Some(tolerance),
            detail: None,
        }
    }

    /// Passes when `value ≥ tolerance`.
    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= tolerance,
            value: Some(value),
            tolerance: Some(tolerance),
            detail: None,
        }
    }

    /// Passes when `value > 0`.
    pub fn positive(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            passed: value > 0.0,
            value: Some(value),
            tolerance: None,
            detail: None,
        }
    }

    pub fn flag(name: &str, passed: bool) -> Self {
        Self {
            name: name.into(),
            passed,
            value: None,
            tolerance: None,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Everything a command produced, before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub results: Map<String, Value>,
    /// `(file name, contents)`, written in order.
    pub files: Vec<(String, Vec<u8>)>,
    /// Set when the scan could not decide (e.g. no shock within horizon).
    pub inconclusive: bool,
}

impl Outcome {
    pub fn new() -> Self {
        Self {
            checks: Vec::new(),
            results: Map::new(),
            files: Vec::new(),
            inconclusive: false,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("results are plain data");
        self.results.insert(key.to_string(), v);
    }

    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn status(&self) -> Status {
        if self.checks.iter().any(|c| !c.passed) {
            Status::Fail
        } else if self.inconclusive {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }
}

impl Default for Outcome {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub command: &'a str,
    pub status: Status,
    pub checks: &'a [Check],
    pub results: &'a Map<String, Value>,
    pub files: Vec<&'a str>,
}

fn fmt_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn summary_text(s: &Summary<'_>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command: {}", s.command);
    let _ = writeln!(out, "status:  {}", s.status.as_str());
    if !s.checks.is_empty() {
        let _ = writeln!(out, "\nchecks:");
    }
    for c in s.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        let _ = write!(out, "  [{mark}] {}", c.name);
        if let Some(v) = c.value {
            let _ = write!(out, " = {v:.6e}");
        }
        if let Some(t) = c.tolerance {
            let _ = write!(out, " (tolerance {t:.1e})");
        }
        if let Some(d) = &c.detail {
            let _ = write!(out, " - {d}");
        }
        out.push('\n');
    }
    let scalars: Vec<(&String, &Value)> = s
        .results
        .iter()
        .filter(|(_, v)| !(v.is_array() || v.is_object()))
        .collect();
    if !scalars.is_empty() {
        let _ = writeln!(out, "\nresults:");
        for (k, v) in scalars {
            let _ = writeln!(out, "  {k}: {}", fmt_value(v));
        }
    }
    out
}

/// Writes the command's files plus `summary.json` and `summary.txt`.
pub fn write_outputs(dir: &Path, command: &str, outcome: &Outcome) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in &outcome.files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    let summary = Summary {
        command,
        status: outcome.status(),
        checks: &outcome.checks,
        results: &outcome.results,
        files: outcome.files.iter().map(|(n, _)| n.as_str()).collect(),
    };
    let mut json = serde_json::to_vec_pretty(&summary).map_err(io::Error::other)?;
    json.push(b'\n');
    let path = dir.join("summary.json");
    fs::write(&path, json)?;
    written.push(path);
    let path = dir.join("summary.txt");
    fs::write(&path, summary_text(&summary))?;
    written.push(path);
    Ok(written)
}
