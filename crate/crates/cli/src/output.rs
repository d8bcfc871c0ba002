use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{Map, Value};

use crate::args::Format;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Table) {
        self.rows.extend(other.rows);
    }

    fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        Ok(w.into_inner().context("flushing CSV")?)
    }
}

/// A result in both renderings; only the requested one is written.
#[derive(Debug)]
pub struct Document {
    pub table: Table,
    pub json: Map<String, Value>,
}

impl Document {
    pub fn new(table: Table, json: Map<String, Value>) -> Self {
        Self { table, json }
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => self.table.to_csv(),
            Format::Json => {
                let mut obj = Map::new();
                obj.insert("schema_version".into(), SCHEMA_VERSION.into());
                obj.extend(self.json.clone());
                let mut bytes = serde_json::to_vec_pretty(&Value::Object(obj))?;
                bytes.push(b'\n');
                Ok(bytes)
            }
        }
    }
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}
