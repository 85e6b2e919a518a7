//! CSV tables with a `#` comment block recording the configuration.

use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const ROC_HEADER: &[&str] = &["algo", "threshold", "pf", "pd", "trials"];
pub const MINFRAC_HEADER: &[&str] = &[
    "tau_d",
    "alpha",
    "c_r",
    "k",
    "L",
    "t_hat",
    "t_cont",
    "status",
    "pd_approx",
    "pd_empirical",
];
pub const P1P2_HEADER: &[&str] = &["c_r", "P1", "P2", "trials"];
pub const SUMMARY_HEADER: &[&str] = &["algo", "auc", "auc_se", "messages_per_node", "trials"];
pub const FTRACE_HEADER: &[&str] = &["c_r", "k", "L", "alpha", "t", "f", "f_prime", "pd_approx"];
pub const VALIDATE_HEADER: &[&str] = &["check", "passed", "detail"];

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form; empty for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Comment lines: command, seed, content hash, extra notes, then the full
/// configuration.
pub fn metadata(command: &str, cfg: &ExperimentConfig, notes: &[String]) -> Vec<String> {
    let mut lines = vec![
        format!("command = {command}"),
        format!("seed = {}", cfg.seed),
        format!("config_sha256 = {}", cfg.content_hash()),
    ];
    lines.extend(notes.iter().cloned());
    lines.push("config:".to_string());
    lines.extend(cfg.to_toml().lines().map(|l| format!("  {l}")));
    lines
}

/// Render the comment block followed by the CSV body.
pub fn render(meta: &[String], table: &Table) -> Result<String> {
    let mut out = String::new();
    for line in meta {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

/// Write `render(meta, table)` to `dir/name`, creating `dir` if needed.
pub fn write(dir: &Path, name: &str, meta: &[String], table: &Table) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, render(meta, table)?)?;
    Ok(path)
}
