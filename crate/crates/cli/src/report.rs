//! Deterministic report files: a JSON payload (byte-identical for identical
//! config and seed), optional CSV tables for curves, and a run manifest that
//! carries the wall-clock data excluded from the payload.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Serialize a complex number as a two-element [re, im] array.
pub fn cplx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn cvec(zs: &[Complex64]) -> Value {
    Value::Array(zs.iter().map(|&z| cplx(z)).collect())
}

pub fn cmatrix(m: &ndarray::Array2<Complex64>) -> Value {
    Value::Array(
        m.rows()
            .into_iter()
            .map(|row| Value::Array(row.iter().map(|&z| cplx(z)).collect()))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl std::str::FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "both" | "json,csv" | "csv,json" => Ok(Format::Both),
            other => anyhow::bail!("unknown format {other:?} (expected json, csv or both)"),
        }
    }
}

pub struct CsvTable {
    pub name: String,
    pub header: String,
    pub rows: Vec<String>,
}

pub struct RunWriter {
    out_dir: PathBuf,
    command: String,
    format: Format,
    started: Instant,
    started_at: chrono::DateTime<chrono::Utc>,
}

impl RunWriter {
    pub fn new(out_dir: &Path, command: &str, format: Format) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            format,
            started: Instant::now(),
            started_at: chrono::Utc::now(),
        })
    }

    /// Write the payload, tables and manifest. The JSON payload is a
    /// function of config and seed only; timestamps and timings go to the
    /// manifest.
    pub fn finish(
        &self,
        params: Value,
        results: Value,
        tables: &[CsvTable],
        config_echo: Value,
    ) -> Result<()> {
        if matches!(self.format, Format::Json | Format::Both) {
            let mut payload = Map::new();
            payload.insert("schema_version".into(), json!(SCHEMA_VERSION));
            payload.insert("command".into(), json!(self.command));
            payload.insert("params".into(), params);
            payload.insert("results".into(), results);
            let path = self.out_dir.join(format!("{}.json", self.command));
            let mut text = serde_json::to_string_pretty(&Value::Object(payload))?;
            text.push('\n');
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        if matches!(self.format, Format::Csv | Format::Both) {
            for table in tables {
                let file = if table.name.is_empty() {
                    format!("{}.csv", self.command)
                } else {
                    format!("{}_{}.csv", self.command, table.name)
                };
                let path = self.out_dir.join(file);
                let mut text = String::with_capacity(table.rows.len() * 32);
                text.push_str(&table.header);
                text.push('\n');
                for row in &table.rows {
                    text.push_str(row);
                    text.push('\n');
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        let mut config = match config_echo {
            Value::Object(map) => map,
            other => {
                let mut map = Map::new();
                map.insert("params".into(), other);
                map
            }
        };
        config.insert("out".into(), json!(self.out_dir.display().to_string()));
        config.insert(
            "format".into(),
            json!(match self.format {
                Format::Json => "json",
                Format::Csv => "csv",
                Format::Both => "both",
            }),
        );
        let manifest = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": config,
            "version": env!("CARGO_PKG_VERSION"),
            "started_at": self.started_at.to_rfc3339(),
            "wall_time_ms": self.started.elapsed().as_millis() as u64,
        });
        let path = self.out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
