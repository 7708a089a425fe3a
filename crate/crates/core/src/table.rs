//! Comma-separated output tables with a declared header.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_values(&mut self, values: &[f64]) -> Result<()> {
        self.push(values.iter().map(|&v| fmt_f64(v)).collect())
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    /// Schema self-check: non-empty unique column names and every row as
    /// wide as the header.
    pub fn validate(&self) -> Result<()> {
        if self.header.is_empty() {
            return Err(invalid("table has no columns"));
        }
        for (k, h) in self.header.iter().enumerate() {
            if h.trim().is_empty() {
                return Err(invalid(format!("column {k} has an empty name")));
            }
            if self.header[..k].contains(h) {
                return Err(invalid(format!("duplicate column name {h:?}")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(invalid(format!(
                    "row {r} has {} fields, header declares {}",
                    row.len(),
                    self.header.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        self.validate()?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Validates, writes to a sibling temporary file, then renames into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(io)?;
        let header = r
            .headers()
            .map_err(io)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut table = Self {
            header,
            rows: Vec::new(),
        };
        for rec in r.records() {
            table
                .rows
                .push(rec.map_err(io)?.iter().map(str::to_string).collect());
        }
        table.validate()?;
        Ok(table)
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| invalid(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}
