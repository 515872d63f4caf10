//! Report files. Output is a pure function of the config: no timestamps, no
//! hash-map ordering, fixed float formatting.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use stargraph::{Error, Result};

use crate::config::RunConfig;

pub const SCHEMA: u32 = 1;

/// Shortest decimal that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        format!("{x}").to_lowercase()
    }
}

/// Seventeen significant digits, for columns compared bit for bit.
pub fn mirror(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Csv {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// What a subcommand produced.
pub struct Outcome {
    pub summary: String,
    pub result: Value,
    pub csv: Csv,
    /// Further files, relative to the output directory.
    pub extra: Vec<(String, String)>,
}

pub fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

pub fn json_text<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("report values serialize") + "\n"
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io(path, e))
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `<command>.json`, `<command>.csv` and the extra files into `out`.
pub fn emit(out: &Path, command: &str, cfg: &RunConfig, outcome: &Outcome) -> Result<()> {
    let report = json!({
        "schema": SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": cfg.hash(),
        "config": cfg.values(),
        "result": outcome.result,
    });
    write(&out.join(format!("{command}.json")), &json_text(&report))?;
    write(&out.join(format!("{command}.csv")), &outcome.csv.render())?;
    for (name, text) in &outcome.extra {
        write(&out.join(name), text)?;
    }
    Ok(())
}
