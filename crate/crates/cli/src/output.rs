use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Command, Format, RunArgs};
use crate::CliError;

/// One table entry.
#[derive(Clone, Debug)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Null => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

/// Header plus rows with a fixed column order.
#[derive(Clone, Debug)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv))?;
                }
                w.flush()?;
            }
            Format::Json => {
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let map: Map<String, Value> = self
                            .header
                            .iter()
                            .zip(row)
                            .map(|(h, c)| (h.to_string(), c.json()))
                            .collect();
                        Value::Object(map)
                    })
                    .collect();
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, &records)?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Writes the main table to `--out` (with a provenance file beside it) or
/// to stdout.
pub fn emit(table: &Table, command: Command, args: &RunArgs) -> Result<(), CliError> {
    match &args.out {
        Some(path) => {
            write_file(path, |f| table.write(f, args.format))?;
            write_provenance(path, command, args)
        }
        None => table.write(io::stdout().lock(), args.format),
    }
}

/// Writes a secondary table to `<stem>.<suffix>.<ext>` beside `--out`, or
/// to stderr when there is no output file.
pub fn emit_secondary(table: &Table, suffix: &str, args: &RunArgs) -> Result<(), CliError> {
    match &args.out {
        Some(path) => write_file(&sibling(path, suffix, extension(args.format)), |f| table.write(f, args.format)),
        None => table.write(io::stderr().lock(), args.format),
    }
}

/// Writes a JSON document beside `--out`, or to stderr.
pub fn emit_json<T: Serialize>(value: &T, suffix: &str, args: &RunArgs) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match &args.out {
        Some(path) => write_file(&sibling(path, suffix, "json"), |f| Ok(f.write_all(text.as_bytes())?)),
        None => Ok(io::stderr().write_all(text.as_bytes())?),
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// `dir/stem.suffix.ext` for `dir/stem.anything`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

pub fn write_file<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut io::BufWriter<fs::File>) -> Result<(), CliError>,
{
    let file = fs::File::create(path).map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
    let mut w = io::BufWriter::new(file);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunArgs,
}

fn write_provenance(path: &Path, command: Command, args: &RunArgs) -> Result<(), CliError> {
    let record = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config: args,
    };
    let text = serde_json::to_string_pretty(&record)? + "\n";
    let name = format!("{}.provenance.json", path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default());
    write_file(&path.with_file_name(name), |f| Ok(f.write_all(text.as_bytes())?))
}
