//! Reports, invariant checks and deterministic artifact emission.

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Bound the value is compared against; its meaning is in `relation`.
    pub tolerance: f64,
    /// `<=`, `>=` or `==` (within tolerance).
    pub relation: &'static str,
    /// Grid or quadrature level the value was computed at.
    pub refinement: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64, refinement: impl Into<String>) -> Self {
        Self { name: name.into(), value, tolerance, relation: "<=", refinement: refinement.into(), pass: value <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, refinement: impl Into<String>) -> Self {
        Self { name: name.into(), value, tolerance: bound, relation: ">=", refinement: refinement.into(), pass: value >= bound }
    }

    pub fn flag(name: impl Into<String>, ok: bool, refinement: impl Into<String>) -> Self {
        Self { name: name.into(), value: ok as u8 as f64, tolerance: 1.0, relation: "==", refinement: refinement.into(), pass: ok }
    }
}

/// A rectangular table with a documented header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Result of one subcommand before emission.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub payload: Value,
    pub checks: Vec<Check>,
    pub table: Option<Table>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub config: RunConfig,
    pub provenance: Provenance,
    pub payload: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(subcommand: &str, config: &RunConfig, outcome: &Outcome) -> Self {
        Self {
            subcommand: subcommand.into(),
            config: config.clone(),
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION"),
                schema_version: SCHEMA_VERSION,
                config_hash: config_hash(config),
                seed: config.seed,
            },
            payload: outcome.payload.clone(),
            checks: outcome.checks.clone(),
            pass: outcome.checks.iter().all(|c| c.pass),
        }
    }

    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

/// First 12 hex digits of the SHA-256 of the configuration without its output block.
pub fn config_hash(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.output = Default::default();
    let bytes = serde_json::to_vec(&c).expect("configuration serializes");
    Sha256::digest(&bytes).iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Writes `{subcommand}-{hash}.json` and/or `.csv` into `dir`; returns the paths.
pub fn emit_report(report: &RunReport, table: Option<&Table>, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let stem = format!("{}-{}", report.subcommand, report.provenance.config_hash);
    let mut out = Vec::new();
    for f in formats {
        match f {
            Format::Json => {
                let path = dir.join(format!("{stem}.json"));
                let mut text = serde_json::to_string_pretty(report).expect("report serializes");
                text.push('\n');
                std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                out.push(path);
            }
            Format::Csv => {
                let Some(t) = table else { continue };
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                w.write_record(&t.header).map_err(|e| CliError::Io(e.to_string()))?;
                for r in &t.rows {
                    w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
                }
                w.flush().map_err(|e| CliError::Io(e.to_string()))?;
                out.push(path);
            }
        }
    }
    Ok(out)
}

/// Shortest round-trip text of a float, as used in every CSV cell.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
