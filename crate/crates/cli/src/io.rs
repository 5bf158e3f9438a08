use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use bms_core::{BmsError, Configuration, IterationRecord};
use clap::ValueEnum;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PointFormat {
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("no data rows found")]
    Empty,
    #[error("row {row}, column {col}: `{value}` is not a number")]
    Cell { row: u64, col: usize, value: String },
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged { row: u64, expected: usize, found: usize },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] BmsError),
}

/// Reads points from CSV (optional header row) or a JSON array of arrays.
/// Without an explicit format, a `.json` extension selects JSON.
pub fn load_points(path: &Path, format: Option<PointFormat>) -> Result<Configuration, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format = format.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "json" => PointFormat::Json,
            _ => PointFormat::Csv,
        }
    });
    match format {
        PointFormat::Csv => parse_csv(&text),
        PointFormat::Json => parse_json(&text),
    }
}

pub fn parse_csv(text: &str) -> Result<Configuration, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Result<f64, &str>> = record
            .iter()
            .map(|cell| cell.parse::<f64>().map_err(|_| cell))
            .collect();
        // a first row with no numeric cell at all is a header
        if rows.is_empty() && width.is_none() && parsed.iter().all(Result::is_err) {
            width = Some(parsed.len());
            continue;
        }
        let mut values = Vec::with_capacity(parsed.len());
        for (c, cell) in parsed.into_iter().enumerate() {
            match cell {
                Ok(v) => values.push(v),
                Err(raw) => {
                    return Err(InputError::Cell {
                        row,
                        col: c + 1,
                        value: raw.to_string(),
                    })
                }
            }
        }
        let expected = *width.get_or_insert(values.len());
        if values.len() != expected {
            return Err(InputError::Ragged {
                row,
                expected,
                found: values.len(),
            });
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(InputError::Empty);
    }
    Ok(Configuration::from_rows(&rows)?)
}

pub fn parse_json(text: &str) -> Result<Configuration, InputError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text)?;
    let Some(first) = rows.first() else {
        return Err(InputError::Empty);
    };
    let expected = first.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != expected) {
        return Err(InputError::Ragged {
            row: i as u64 + 1,
            expected,
            found: r.len(),
        });
    }
    Ok(Configuration::from_rows(&rows)?)
}

/// Opens `path` for writing, or stdout when absent.
pub fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Streams iteration records as JSON Lines.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &IterationRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn emit_trace(records: &[IterationRecord], path: &Path) -> anyhow::Result<()> {
    let file = File::create(path).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", path.display()))?;
    let mut w = TraceWriter::new(BufWriter::new(file));
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

pub fn write_points_csv<W: Write>(mut out: W, cfg: &Configuration) -> io::Result<()> {
    let header: Vec<String> = (0..cfg.d()).map(|k| format!("x{k}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in cfg.points() {
        let cells: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
