//! CSV and JSON writers. Every file carries the effective configuration.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

pub fn open(cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Diagnostics written after the configuration block.
#[derive(Debug, Default, Clone)]
pub struct Meta {
    pub entries: Vec<(String, Value)>,
}

impl Meta {
    pub fn push(&mut self, key: &str, value: impl Into<Value>) {
        self.entries.push((key.to_string(), value.into()));
    }
}

fn config_object(cfg: &RunConfig) -> Map<String, Value> {
    cfg.pairs()
        .into_iter()
        .map(|(k, v)| (k.to_string(), Value::String(v)))
        .collect()
}

/// A table of numbers with named columns, one row per job.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn write_table(cfg: &RunConfig, meta: &Meta, table: &Table, out: &mut dyn Write) -> Result<()> {
    match cfg.format {
        crate::config::Format::Csv => {
            write_csv_header(cfg, meta, out)?;
            writeln!(out, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        crate::config::Format::Json => {
            let data: Vec<f64> = table.rows.iter().flatten().copied().collect();
            let doc = grid_document(
                cfg,
                meta,
                &[table.rows.len(), table.columns.len()],
                json!({ "row": (0..table.rows.len()).collect::<Vec<_>>(), "column": table.columns }),
                json!(data),
            );
            serde_json::to_writer(&mut *out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_header(cfg: &RunConfig, meta: &Meta, out: &mut dyn Write) -> Result<()> {
    for (k, v) in cfg.pairs() {
        writeln!(out, "# {k} = {v}")?;
    }
    writeln!(out, "## version = {}", env!("CARGO_PKG_VERSION"))?;
    for (k, v) in &meta.entries {
        writeln!(out, "## {k} = {v}")?;
    }
    Ok(())
}

/// `{"meta": {...}, "shape": [...], "index": {...}, "data": [...]}`.
pub fn grid_document(
    cfg: &RunConfig,
    meta: &Meta,
    shape: &[usize],
    index: Value,
    data: Value,
) -> Value {
    let mut m = Map::new();
    m.insert("config".into(), Value::Object(config_object(cfg)));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    for (k, v) in &meta.entries {
        m.insert(k.clone(), v.clone());
    }
    json!({ "meta": m, "shape": shape, "index": index, "data": data })
}

pub fn write_json(doc: &Value, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer(&mut *out, doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
