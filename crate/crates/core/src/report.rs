//! Persistence of classification reports and sweep tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::yang_mills::{ClassificationReport, SCHEMA_VERSION};

pub fn save_report(report: &ClassificationReport, path: &Path) -> Result<()> {
    fs::write(path, json::to_string(report)?)?;
    Ok(())
}

pub fn parse_report(text: &str) -> Result<ClassificationReport> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("unreadable report: {e}")))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(Error::Schema(format!("unsupported schema_version {v}"))),
        None => return Err(Error::Schema("missing schema_version".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
}

pub fn load_report(path: &Path) -> Result<ClassificationReport> {
    parse_report(&fs::read_to_string(path)?)
}

/// Verdict fields written to sweep tables, one row per family and field.
pub const VERDICT_FIELDS: [&str; 4] = ["classical_nym", "classical_tym", "is_nym_evidence", "is_tym_evidence"];

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub m: usize,
    pub k: usize,
    pub m1: usize,
    pub m2: usize,
    pub variant: String,
    pub samples: usize,
    pub max_abs_obstruction: f64,
    pub checks_passed: bool,
    pub verdict: String,
    pub value: bool,
}

pub fn sweep_rows(r: &ClassificationReport) -> Vec<SweepRow> {
    let v = &r.verdicts;
    let values = [v.classical_nym, v.classical_tym, v.is_nym_evidence, v.is_tym_evidence];
    VERDICT_FIELDS
        .iter()
        .zip(values)
        .map(|(name, value)| SweepRow {
            family: r.family.label(),
            m: r.family.m,
            k: r.family.k,
            m1: r.multiplicities.0,
            m2: r.multiplicities.1,
            variant: format!("{:?}", r.variant.kind),
            samples: r.stats.samples_ok,
            max_abs_obstruction: r.stats.max_abs_obstruction,
            checks_passed: v.checks_passed,
            verdict: name.to_string(),
            value,
        })
        .collect()
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Convert reports to a CSV table, or a sweep table back to JSON rows.
pub fn export(input: &Path, output: &Path) -> Result<()> {
    let ext = |p: &Path| p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match (ext(input).as_deref(), ext(output).as_deref()) {
        (Some("json"), Some("csv")) => {
            let text = fs::read_to_string(input)?;
            let rows = if text.trim_start().starts_with('[') {
                let values: Vec<serde_json::Value> =
                    serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
                let mut rows = Vec::new();
                for v in values {
                    rows.extend(sweep_rows(&parse_report(&v.to_string())?));
                }
                rows
            } else {
                sweep_rows(&parse_report(&text)?)
            };
            write_sweep(&rows, fs::File::create(output)?)
        }
        (Some("csv"), Some("json")) => {
            let rows = read_sweep(input)?;
            fs::write(output, json::to_string(&rows)?)?;
            Ok(())
        }
        _ => Err(Error::InvalidInput(format!(
            "export converts .json to .csv or .csv to .json, got {} -> {}",
            input.display(),
            output.display()
        ))),
    }
}
