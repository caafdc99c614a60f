//! Run reports and deterministic result emission. Floats are printed with
//! 17 significant digits so byte-identical CSV certifies replay.

use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: String) -> Verdict {
        Verdict { name: name.into(), pass, detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario_digest: String,
    pub experiment: String,
    pub wall_time_s: f64,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
    /// Experiment-specific payload.
    pub results: serde_json::Value,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// 17-significant-digit float text, locale-free.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV accumulator with a fixed header.
pub struct Csv {
    buffer: String,
}

impl Csv {
    pub fn new(header: &str) -> Csv {
        let mut buffer = String::new();
        buffer.push_str(header);
        buffer.push('\n');
        Csv { buffer }
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        let mut first = true;
        for f in fields {
            if !first {
                self.buffer.push(',');
            }
            first = false;
            match f {
                CsvField::Int(v) => {
                    let _ = write!(self.buffer, "{v}");
                }
                CsvField::Float(v) => self.buffer.push_str(&fmt_float(*v)),
                CsvField::Text(v) => self.buffer.push_str(v),
            }
        }
        self.buffer.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.buffer.as_bytes())
    }
}

pub enum CsvField<'a> {
    Int(i64),
    Float(f64),
    Text(&'a str),
}

/// Resolves the output directory, honoring the environment override.
pub fn resolve_output_dir(configured: &str) -> PathBuf {
    match std::env::var("FATOU_LAB_OUTPUT_DIR") {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(configured),
    }
}
