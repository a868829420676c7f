use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

/// Rows plus the header used when there are none.
pub struct Table<R> {
    pub header: &'static [&'static str],
    pub rows: Vec<R>,
}

impl<R: Serialize> Table<R> {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Jsonl => {
                let mut out = String::new();
                for row in &self.rows {
                    out.push_str(&serde_json::to_string(row).map_err(runtime)?);
                    out.push('\n');
                }
                Ok(out)
            }
            Format::Csv => {
                let mut wtr = csv::WriterBuilder::new()
                    .has_headers(false)
                    .from_writer(Vec::new());
                wtr.write_record(self.header).map_err(runtime)?;
                for row in &self.rows {
                    wtr.serialize(row).map_err(runtime)?;
                }
                let bytes = wtr.into_inner().map_err(runtime)?;
                String::from_utf8(bytes).map_err(runtime)
            }
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(&self.rows).unwrap_or(Value::Null)
    }
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn emit(text: &str) -> Result<(), CliError> {
    let mut stdout = io::stdout().lock();
    stdout.write_all(text.as_bytes()).map_err(runtime)?;
    stdout.flush().map_err(runtime)
}

#[derive(Serialize)]
pub struct RunRecord<'a> {
    pub timestamp: String,
    pub subcommand: &'a str,
    pub config: Value,
    pub result: Value,
    pub version: &'static str,
    pub seed: u64,
}

/// Appends one line with a single write so concurrent runs never interleave records.
pub fn append_record(path: &Path, record: &RunRecord) -> Result<(), CliError> {
    let mut line = serde_json::to_string(record).map_err(runtime)?;
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    file.write_all(line.as_bytes()).map_err(runtime)
}
