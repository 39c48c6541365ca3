use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::args::{Format, Output};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Tabular command output with its reproducibility header.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub db_checksum: Option<u32>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new<C: Serialize>(command: &'static str, config: &C, columns: &[&str]) -> Self {
        Report {
            command,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            seed: None,
            db_checksum: None,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Value>) {
        self.rows.push(cells);
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// SHA-256 of the serialized config, hex encoded.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(&json!({ "command": self.command, "config": self.config })).unwrap_or_default();
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert(c.clone(), v.clone());
                }
                Value::Object(m)
            })
            .collect();
        json!({
            "tool": "iterint",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash(),
            "seed": self.seed,
            "db_checksum": self.db_checksum.map(|c| format!("{c:08x}")),
            "rows": rows,
            "checks": self.checks,
            "notes": self.notes,
            "pass": self.all_pass(),
        })
    }

    pub fn to_csv(&self) -> std::io::Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "# iterint {} {}", env!("CARGO_PKG_VERSION"), self.command)?;
        writeln!(out, "# config: {}", self.config)?;
        writeln!(out, "# config_hash: {}", self.config_hash())?;
        if let Some(s) = self.seed {
            writeln!(out, "# seed: {s}")?;
        }
        if let Some(c) = self.db_checksum {
            writeln!(out, "# db_checksum: {c:08x}")?;
        }
        for n in &self.notes {
            writeln!(out, "# note: {n}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns)?;
            for r in &self.rows {
                w.write_record(r.iter().map(cell_text))?;
            }
            w.flush()?;
        }
        for c in &self.checks {
            writeln!(out, "# check {}: {} {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail)?;
        }
        Ok(out)
    }

    pub fn emit(&self, output: &Output) -> std::io::Result<()> {
        let bytes = match output.format {
            Format::Json => {
                let mut b = serde_json::to_vec_pretty(&self.to_json())?;
                b.push(b'\n');
                b
            }
            Format::Csv => self.to_csv()?,
        };
        match &output.out {
            Some(p) => write_file(p, &bytes),
            None => std::io::stdout().write_all(&bytes),
        }
    }
}

fn write_file(p: &Path, bytes: &[u8]) -> std::io::Result<()> {
    std::fs::write(p, bytes)
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// JSON number for finite values, null otherwise.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}
