//! CSV input and output of raw signals.
//!
//! Columns are picked by header name or 0-based index. A file has a header
//! row when any cell of its first record is not a number. Rows holding a
//! missing or non-finite value in a used column are dropped and counted;
//! any other unparseable cell is an error.

use std::io::Read;
use std::path::Path;

use fcd_core::signal::Signal;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub x_column: String,
    pub y_column: String,
    /// Data rows read, before dropping.
    pub rows: usize,
    /// Rows dropped for missing or non-finite values.
    pub dropped: usize,
    pub reordered: bool,
    /// Rows merged into an earlier one with the same x.
    pub collapsed: usize,
}

enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    fn parse(spec: Option<&str>, default: usize) -> Column {
        match spec {
            None => Column::Index(default),
            Some(s) => s
                .trim()
                .parse()
                .map(Column::Index)
                .unwrap_or_else(|_| Column::Name(s.trim().to_string())),
        }
    }

    fn resolve(&self, header: Option<&csv::StringRecord>) -> Result<(usize, String)> {
        match self {
            Column::Index(i) => {
                let name = header
                    .and_then(|h| h.get(*i))
                    .map(str::to_string)
                    .unwrap_or_else(|| i.to_string());
                Ok((*i, name))
            }
            Column::Name(n) => header
                .and_then(|h| h.iter().position(|c| c.trim() == n))
                .map(|i| (i, n.clone()))
                .ok_or_else(|| CliError::data("MissingColumn", format!("no column named `{n}`"))),
        }
    }
}

fn is_number(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Reads a signal from `path`; see [`read_csv`].
pub fn ingest_csv(path: &Path, x_col: Option<&str>, y_col: Option<&str>) -> Result<(Signal, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(file, x_col, y_col)
}

/// Parses CSV text into a sorted signal with duplicate x values collapsed.
/// Lines starting with `#` are ignored.
pub fn read_csv<R: Read>(reader: R, x_col: Option<&str>, y_col: Option<&str>) -> Result<(Signal, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        None => return Err(CliError::data("NoUsableRows", "input has no rows")),
        Some(r) => r.map_err(|e| CliError::data("InvalidCsv", e.to_string()))?,
    };
    let header = if first.iter().all(is_number) { None } else { Some(first.clone()) };
    let (xi, x_name) = Column::parse(x_col, 0).resolve(header.as_ref())?;
    let (yi, y_name) = Column::parse(y_col, 1).resolve(header.as_ref())?;

    let body = header.is_none().then_some(Ok(first)).into_iter().chain(records);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (mut rows, mut dropped) = (0, 0);
    for rec in body {
        let rec = rec.map_err(|e| CliError::data("InvalidCsv", e.to_string()))?;
        rows += 1;
        let line = rec.position().map_or(rows, |p| p.line() as usize);
        let cell = |i: usize, name: &str| -> Result<Option<f64>> {
            let raw = rec.get(i).ok_or_else(|| {
                CliError::data("MissingColumn", format!("line {line} has no column {name}"))
            })?;
            let raw = raw.trim();
            if raw.is_empty() {
                return Ok(None);
            }
            let v: f64 = raw.parse().map_err(|_| {
                CliError::data(
                    "NonNumericCell",
                    format!("line {line}, column {name}: `{raw}` is not a number"),
                )
            })?;
            Ok(v.is_finite().then_some(v))
        };
        match (cell(xi, &x_name)?, cell(yi, &y_name)?) {
            (Some(x), Some(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ => dropped += 1,
        }
    }
    if xs.is_empty() {
        return Err(CliError::data("NoUsableRows", format!("all {rows} rows were dropped")));
    }
    let (signal, clean) = Signal::from_samples(xs, ys)?;
    Ok((
        signal,
        IngestReport {
            x_column: x_name,
            y_column: y_name,
            rows,
            dropped,
            reordered: clean.reordered,
            collapsed: clean.collapsed,
        },
    ))
}

/// Writes `x,y` with a header row; values round-trip exactly.
pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    std::fs::write(path, signal_csv(signal)).map_err(|e| CliError::io(path, e))
}

pub fn signal_csv(signal: &Signal) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in signal.x().iter().zip(signal.y()) {
        out.push_str(&format!("{x:?},{y:?}\n"));
    }
    out
}
