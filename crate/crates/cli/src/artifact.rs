use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;

pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// The one header line excluded from byte-for-byte reproducibility.
pub const TIMESTAMP_KEY: &str = "generated_at_unix";

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value <= limit }
    }

    /// Passes when `value ≥ limit`.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value >= limit }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub stem: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key=value` header lines.
    pub notes: Vec<(String, String)>,
}

/// Everything a command produces before it touches the disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn meta(run: &Resolved) -> Value {
    json!({
        "command": run.command.name(),
        "version": VERSION,
        "schema": SCHEMA,
        "seed": run.seed(),
        "config_sha256": run.config_sha256(),
        "config": run.config,
        "tolerances": run.tolerances(),
    })
}

fn csv_text(run: &Resolved, table: &Table, timestamp: u64) -> Result<String, csv::Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# schema={SCHEMA}");
    let _ = writeln!(out, "# command={}", run.command.name());
    let _ = writeln!(out, "# version={VERSION}");
    let _ = writeln!(out, "# seed={}", run.seed());
    let _ = writeln!(out, "# config_sha256={}", run.config_sha256());
    let _ = writeln!(out, "# tolerances={}", serde_json::to_string(run.tolerances()).expect("serializable"));
    for (k, v) in &table.notes {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "# {TIMESTAMP_KEY}={timestamp}");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let body = w.into_inner().map_err(|e| e.into_error())?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

/// Writes `<command>.json` plus one CSV per table and returns the paths.
pub fn write(run: &Resolved, outcome: &Outcome) -> std::io::Result<Vec<PathBuf>> {
    let dir = &run.output_dir;
    fs::create_dir_all(dir)?;
    let doc = json!({
        "meta": meta(run),
        "result": outcome.result,
        "checks": outcome.checks,
        "pass": outcome.pass(),
    });
    let json_path = dir.join(format!("{}.json", run.command.name()));
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    fs::write(&json_path, text)?;
    let mut paths = vec![json_path];
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    for table in &outcome.tables {
        let path = dir.join(format!("{}.csv", table.stem));
        let text = csv_text(run, table, timestamp).map_err(std::io::Error::other)?;
        fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// A parsed results CSV: header comments and typed columns.
#[derive(Debug, Clone, Default)]
pub struct ResultsCsv {
    pub notes: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultsCsv {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut notes = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.trim().split_once('=') {
                    notes.push((k.to_string(), v.to_string()));
                }
            } else if !line.trim().is_empty() {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
        if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
            return Err("CSV has no header row".into());
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let row = rec
                .iter()
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err("CSV has no data rows".into());
        }
        Ok(ResultsCsv { notes, columns, rows })
    }

    pub fn note(&self, key: &str) -> Option<&str> {
        self.notes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Names from `wanted` that are absent.
    pub fn missing(&self, wanted: &[&str]) -> Vec<String> {
        wanted.iter().filter(|w| !self.columns.iter().any(|c| c == *w)).map(|w| w.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_own_format() {
        let text = "# schema=1\n# lambda_hat=1.5\nt,entropy,fisher\n0,1,2\n0.5,0.5,1\n";
        let r = ResultsCsv::parse(text).unwrap();
        assert_eq!(r.note("lambda_hat"), Some("1.5"));
        assert_eq!(r.column("entropy").unwrap(), vec![1.0, 0.5]);
        assert_eq!(r.missing(&["t", "C_hat"]), vec!["C_hat".to_string()]);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(ResultsCsv::parse("").is_err());
        assert!(ResultsCsv::parse("# schema=1\nt,C_hat\n").is_err());
    }
}
