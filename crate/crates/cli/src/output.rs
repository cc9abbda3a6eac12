//! Record sinks for the `json`, `jsonl` and `csv` output formats.
//!
//! CSV output starts with a `# pdip-csv v1` line, then a header taken from
//! the keys of the first record. Nested values are written as JSON strings.

use clap::ValueEnum;
use serde_json::Value;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// One JSON array of records.
    Json,
    /// One JSON record per line.
    Jsonl,
    Csv,
}

pub struct Sink {
    out: Box<dyn Write>,
    format: Format,
    header: Option<Vec<String>>,
    count: usize,
}

fn csv_field(v: &Value) -> String {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Number(_) | Value::Bool(_) => v.to_string(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

impl Sink {
    pub fn open(path: Option<&Path>, format: Format) -> io::Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Self { out, format, header: None, count: 0 })
    }

    pub fn write(&mut self, rec: &Value) -> io::Result<()> {
        match self.format {
            Format::Jsonl => writeln!(self.out, "{rec}")?,
            Format::Json => {
                let sep = if self.count == 0 { "[\n" } else { ",\n" };
                write!(self.out, "{sep}{rec}")?;
            }
            Format::Csv => {
                let obj = rec.as_object().ok_or_else(|| io::Error::other("CSV records must be objects"))?;
                if self.header.is_none() {
                    let keys: Vec<String> = obj.keys().cloned().collect();
                    writeln!(self.out, "# pdip-csv v1")?;
                    writeln!(self.out, "{}", keys.join(","))?;
                    self.header = Some(keys);
                }
                let header = self.header.as_ref().expect("header set");
                let row: Vec<String> = header.iter().map(|k| obj.get(k).map_or(String::new(), csv_field)).collect();
                writeln!(self.out, "{}", row.join(","))?;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(&mut self) -> io::Result<()> {
        if self.format == Format::Json {
            let text = if self.count == 0 { "[]\n" } else { "\n]\n" };
            self.out.write_all(text.as_bytes())?;
            self.count = 0;
            self.format = Format::Jsonl;
        }
        self.out.flush()
    }
}
