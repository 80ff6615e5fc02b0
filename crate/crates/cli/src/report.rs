//! Run reports and tabular artifacts.
//!
//! The JSON report's keys appear in a fixed order with `timing` last, so
//! two runs with the same inputs agree byte for byte up to that key.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail | Status::Inconclusive => 1,
        }
    }

    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// A CSV table; written as `<name>.csv` with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: Vec<String>) -> Self {
        Table {
            name,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// What a command produced, before it is wrapped into a report.
#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub verdict: String,
    pub result: Value,
    pub warnings: Vec<String>,
    /// The first table is the main one.
    pub tables: Vec<Table>,
    /// Base-space graph in DOT.
    pub dot: Option<String>,
}

impl Outcome {
    pub fn new(status: Status, verdict: impl Into<String>, result: impl Serialize) -> Self {
        Outcome {
            status,
            verdict: verdict.into(),
            result: serde_json::to_value(result).expect("report values serialize"),
            warnings: Vec::new(),
            tables: Vec::new(),
            dot: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigRef {
    pub name: String,
    /// File name without directories.
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub configs: Vec<ConfigRef>,
    pub parameters: Params,
    pub status: Status,
    pub verdict: String,
    pub result: Value,
    pub warnings: Vec<String>,
    pub tables: Vec<String>,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Writes `report.json`, every table, and `base_space.dot` if present.
pub fn write_outputs(dir: &Path, report: &RunReport, outcome: &Outcome) -> anyhow::Result<()> {
    use anyhow::Context;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    for table in &outcome.tables {
        let path = dir.join(format!("{}.csv", table.name));
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        table
            .write_to(std::io::BufWriter::new(file))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dot) = &outcome.dot {
        let path = dir.join("base_space.dot");
        std::fs::write(&path, dot).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}
