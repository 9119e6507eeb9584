//! CSV tables and number formatting.

use std::io;
use std::path::Path;

/// Objective values: 10 significant digits, fixed notation for moderate
/// magnitudes.
pub fn sig10(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..=5).contains(&exp) {
        format!("{:.*}", (9 - exp) as usize, x)
    } else {
        format!("{x:.9e}")
    }
}

/// Residuals and violations: scientific notation with 3 digits.
pub fn sci3(x: f64) -> String {
    format!("{x:.3e}")
}

/// Penalty parameters and mesh sizes, shortest exact representation.
pub fn short(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e5 || x.abs() < 1e-3) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// An in-memory table that is written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    /// Values of column `name` parsed as numbers.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> csv::Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Plain aligned text for the terminal.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain(std::iter::once(self.header[c].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut s = line(self.header.clone());
        for r in &self.rows {
            s.push('\n');
            s.push_str(&line(r.iter().map(String::as_str).collect()));
        }
        s
    }
}
