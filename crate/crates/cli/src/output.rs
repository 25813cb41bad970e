//! CSV tables with a `#` metadata preamble.

use std::fs;
use std::path::{Path, PathBuf};

use grainfield::verify::format_f64;

use crate::error::CliError;

/// A cell is either a number (written with 17 significant digits) or text.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub preamble: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            preamble: Vec::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.preamble.push((key.to_string(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Header and rows without the preamble.
    pub fn body(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.preamble {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.body());
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// Creates the output directory and returns the path of `name` inside it.
pub fn output_path(dir: &str, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(Path::new(dir).join(name))
}
