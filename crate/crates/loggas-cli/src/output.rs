//! Table artifacts in CSV or JSON, with every float printed to 17
//! significant digits so reruns can be compared bytewise.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum Field {
    Int(i64),
    Float(f64),
    Str(String),
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Int(i) => i.to_string(),
            Field::Float(v) => fmt_float(*v),
            Field::Str(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            Field::Int(i) => i.to_string(),
            Field::Float(v) => fmt_float(*v),
            Field::Str(s) => format!("{:?}", s),
        }
    }
}

#[derive(Debug)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Field::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let mut out = String::new();
                let cols: Vec<String> =
                    self.columns.iter().map(|c| format!("{c:?}")).collect();
                let _ = write!(out, "{{\"columns\":[{}],\"rows\":[", cols.join(","));
                for (i, row) in self.rows.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let cells: Vec<String> = row.iter().map(Field::json).collect();
                    let _ = write!(out, "[{}]", cells.join(","));
                }
                out.push_str("]}\n");
                out
            }
        }
    }

    /// Write `<dir>/<name>.<ext>` and return the path.
    pub fn write(&self, dir: &Path, format: Format) -> std::io::Result<PathBuf> {
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = dir.join(format!("{}.{ext}", self.name));
        std::fs::write(&path, self.render(format))?;
        Ok(path)
    }
}
