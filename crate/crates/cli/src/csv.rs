//! CSV output: header row, comma separated, 17 significant digits, Unix
//! newlines. The fixed format makes repeated runs byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// 17 significant digits, scientific; round-trips f64 exactly.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "ragged CSV row");
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, dir: &Path, name: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), self.to_csv())
    }
}
