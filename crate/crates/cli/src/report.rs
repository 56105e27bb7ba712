//! Checks, the JSON summary and CSV writers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Holds by construction of the discretization.
    Identity,
    /// Compared with an analytic or pinned reference value.
    Oracle,
    /// A pass/fail threshold chosen for the artifact.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|value - reference| <= tolerance`
    Abs,
    /// `|value - reference| <= tolerance * scale`
    Rel,
    /// `value <= tolerance`
    AtMost,
    /// `value >= tolerance`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub scale: Option<f64>,
    pub rule: Rule,
    pub tolerance: f64,
    pub provenance: Provenance,
    pub passed: bool,
}

/// Collects checks, applying the config's tolerance overrides.
pub struct Checks<'a> {
    overrides: &'a BTreeMap<String, f64>,
    used: BTreeSet<String>,
    pub list: Vec<Check>,
}

impl<'a> Checks<'a> {
    pub fn new(overrides: &'a BTreeMap<String, f64>) -> Self {
        Self { overrides, used: BTreeSet::new(), list: Vec::new() }
    }

    fn push(&mut self, name: String, value: f64, reference: Option<f64>, scale: Option<f64>, rule: Rule, tol: f64, prov: Provenance) {
        let tolerance = match self.overrides.get(&name) {
            Some(&t) => {
                self.used.insert(name.clone());
                t
            }
            None => tol,
        };
        let passed = match rule {
            Rule::Abs => (value - reference.unwrap_or(0.0)).abs() <= tolerance,
            Rule::Rel => (value - reference.unwrap_or(0.0)).abs() <= tolerance * scale.unwrap_or(1.0),
            Rule::AtMost => value <= tolerance,
            Rule::AtLeast => value >= tolerance,
        };
        self.list.push(Check { name, value, reference, scale, rule, tolerance, provenance: prov, passed });
    }

    pub fn abs(&mut self, name: impl Into<String>, value: f64, reference: f64, tol: f64, prov: Provenance) {
        self.push(name.into(), value, Some(reference), None, Rule::Abs, tol, prov);
    }

    /// Relative comparison against `max(|reference|, floor)`.
    pub fn rel(&mut self, name: impl Into<String>, value: f64, reference: f64, floor: f64, tol: f64, prov: Provenance) {
        let scale = reference.abs().max(floor);
        self.push(name.into(), value, Some(reference), Some(scale), Rule::Rel, tol, prov);
    }

    pub fn at_most(&mut self, name: impl Into<String>, value: f64, tol: f64, prov: Provenance) {
        self.push(name.into(), value, None, None, Rule::AtMost, tol, prov);
    }

    pub fn at_least(&mut self, name: impl Into<String>, value: f64, tol: f64, prov: Provenance) {
        self.push(name.into(), value, None, None, Rule::AtLeast, tol, prov);
    }

    /// Errors if an override names a check this run never made.
    pub fn finish(self) -> Result<Vec<Check>, CliError> {
        let unknown: Vec<&String> = self.overrides.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            let known: Vec<&str> = self.list.iter().map(|c| c.name.as_str()).collect();
            return Err(CliError::Config(format!(
                "tolerance overrides {unknown:?} match no check; this run has {known:?}"
            )));
        }
        Ok(self.list)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub command: String,
    pub seed: Option<u64>,
    pub passed: bool,
    pub failures: Vec<String>,
    pub checks: Vec<Check>,
    /// Raw results backing the checks (tables, histograms, reports).
    pub data: Value,
    pub config: RunConfig,
}

impl Summary {
    pub fn new(config: &RunConfig, checks: Vec<Check>, data: Value) -> Self {
        let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        Self {
            name: config.run_name().to_string(),
            command: config.command.as_str().to_string(),
            seed: config.seed,
            passed: failures.is_empty(),
            failures,
            checks,
            data,
            config: config.clone(),
        }
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV with `header` and numeric rows.
pub fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", num(*x));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
