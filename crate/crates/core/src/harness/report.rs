//! Experiment reports, CSV tables and the JSON manifest.

use super::config::{ExperimentConfig, LoadedConfig};
use crate::error::{Error, Result};
use crate::spectral::snapshot::save_phase_point;
use crate::spectral::PhasePoint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => {
                let a = x.abs();
                if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
                    x.to_string()
                } else {
                    format!("{x:e}")
                }
            }
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// A fixed-column table written as `<name>.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column (`NaN` for text cells).
    pub fn floats(&self, name: &str) -> Vec<f64> {
        match self.column_index(name) {
            Some(i) => self
                .rows
                .iter()
                .map(|r| r[i].as_f64().unwrap_or(f64::NAN))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub name: String,
    pub value: f64,
    pub residual: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A datum that was logged and skipped (blow-up, non-finite state).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub context: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub driver: String,
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
    pub skipped: Vec<Skip>,
    /// Phase-point snapshots saved next to the tables, by file name.
    #[serde(skip)]
    pub snapshots: Vec<(String, PhasePoint)>,
    /// Extra JSON documents written next to the tables, by file name.
    #[serde(skip)]
    pub json: Vec<(String, serde_json::Value)>,
    pub wall_clock_s: f64,
}

impl ExperimentReport {
    pub fn new(driver: &str, cfg: &LoadedConfig) -> Self {
        Self {
            id: cfg.config.experiment.id.clone(),
            driver: driver.to_string(),
            config: cfg.config.clone(),
            tables: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            skipped: Vec::new(),
            snapshots: Vec::new(),
            json: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn fit(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn add_check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn skip(&mut self, context: impl Into<String>, error: &Error) {
        self.skipped.push(Skip {
            context: context.into(),
            error: error.to_string(),
        });
    }

    /// Writes every table, `report.json`, extra JSON, snapshots and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, cfg: &LoadedConfig) -> Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        let mut outputs = Vec::new();
        for t in &self.tables {
            let name = format!("{}.csv", t.name);
            std::fs::write(dir.join(&name), t.to_csv()?)?;
            outputs.push(OutputEntry {
                path: name.into(),
                kind: "csv".into(),
                columns: t.columns.clone(),
                rows: t.rows.len(),
            });
        }
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        outputs.push(OutputEntry {
            path: "report.json".into(),
            kind: "json".into(),
            columns: Vec::new(),
            rows: 0,
        });
        for (name, v) in &self.json {
            std::fs::write(dir.join(name), serde_json::to_string_pretty(v)?)?;
            outputs.push(OutputEntry {
                path: name.into(),
                kind: "json".into(),
                columns: Vec::new(),
                rows: 0,
            });
        }
        for (name, p) in &self.snapshots {
            save_phase_point(&dir.join(name), p)?;
            outputs.push(OutputEntry {
                path: name.into(),
                kind: "snapshot".into(),
                columns: Vec::new(),
                rows: 0,
            });
        }
        let manifest = Manifest {
            config_hash: config_hash(&cfg.source),
            git_describe: git_describe(),
            schema_version: SCHEMA_VERSION,
            experiment: self.id.clone(),
            driver: self.driver.clone(),
            passed: self.passed(),
            outputs,
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(manifest)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    /// `csv`, `json` or `snapshot`.
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub git_describe: String,
    pub schema_version: u32,
    pub experiment: String,
    pub driver: String,
    pub passed: bool,
    pub outputs: Vec<OutputEntry>,
}

pub fn config_hash(source: &str) -> String {
    Sha256::digest(source.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_text_and_keeps_float_precision() {
        let mut t = Table::new("x", &["seed", "value", "status"]);
        t.push(vec![3u64.into(), 0.1f64.into(), "a, b".into()]);
        t.push(vec![4u64.into(), 1e-300f64.into(), "ok".into()]);
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "seed,value,status\n3,0.1,\"a, b\"\n4,1e-300,ok\n");
        assert_eq!(t.floats("value"), vec![0.1, 1e-300]);
        assert!(t.floats("status")[0].is_nan());
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            config_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
