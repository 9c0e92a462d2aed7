//! Campaign reports: CSV tables plus an aligned text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::stats::Comparison;

/// Rows longer than this are left out of the text summary (the CSV has them all).
const SUMMARY_ROWS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn render(&self, out: &mut String) {
        let shown = self.rows.len().min(SUMMARY_ROWS);
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for row in &self.rows[..shown] {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "  {}", parts.join("  ").trim_end());
        };
        let _ = writeln!(out, "\n[{}] {} rows", self.name, self.rows.len());
        line(&self.header, out);
        for row in &self.rows[..shown] {
            line(row, out);
        }
        if shown < self.rows.len() {
            let _ = writeln!(out, "  ... ({} more in {}.csv)", self.rows.len() - shown, self.name);
        }
    }
}

/// A check that decides the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: String,
    pub seed: u64,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    /// Soft findings that are reported but never fail the run.
    pub flags: Vec<String>,
}

impl Report {
    pub fn new(kind: &str, seed: u64) -> Self {
        Self {
            kind: kind.into(),
            seed,
            notes: Vec::new(),
            tables: Vec::new(),
            assertions: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn flag(&mut self, s: impl Into<String>) {
        self.flags.push(s.into());
    }

    pub fn assert(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// The summary text; `wall_time` goes on the last line.
    pub fn summary(&self, wall_time: Option<f64>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment: {}", self.kind);
        let _ = writeln!(out, "version: {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "seed: {}", self.seed);
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let passed = self.assertions.iter().filter(|a| a.passed).count();
        let _ = writeln!(out, "\nassertions: {passed}/{} passed", self.assertions.len());
        for a in &self.assertions {
            let _ = writeln!(
                out,
                "  [{}] {}: {}",
                if a.passed { "PASS" } else { "FAIL" },
                a.name,
                a.detail
            );
        }
        if !self.flags.is_empty() {
            let _ = writeln!(out, "\nflags:");
            for f in &self.flags {
                let _ = writeln!(out, "  {f}");
            }
        }
        for t in &self.tables {
            t.render(&mut out);
        }
        if let Some(w) = wall_time {
            let _ = writeln!(out, "\nwall_time_s: {w:.3}");
        }
        out
    }

    /// Writes `<table>.csv` for every table and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path, wall_time: f64) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            t.write_csv(&path)?;
            files.push(path);
        }
        let path = dir.join("summary.txt");
        fs::write(&path, self.summary(Some(wall_time)))?;
        files.push(path);
        Ok(files)
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x}")
}

/// `empirical, se, ci_low, ci_high, theoretical, z, pass` cells; the interval is `empirical ± z_crit se`.
pub(crate) fn comparison_cells(c: &Comparison, z_crit: f64) -> Vec<String> {
    let (lo, hi) = c.estimate.ci(z_crit);
    vec![
        num(c.estimate.mean),
        num(c.estimate.se),
        num(lo),
        num(hi),
        num(c.theoretical),
        num(c.z_score),
        c.pass.to_string(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_tables_and_summary() {
        let mut r = Report::new("demo", 5);
        let mut t = Table::new("rows", &["k", "value"]);
        t.push(vec!["10".into(), num(0.25)]);
        r.tables.push(t);
        r.assert("value positive", true, "0.25 > 0");
        let dir = tempfile::tempdir().unwrap();
        let files = r.write(dir.path(), 1.5).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(
            fs::read_to_string(dir.path().join("rows.csv")).unwrap(),
            "k,value\n10,0.25\n"
        );
        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.trim_end().ends_with("wall_time_s: 1.500"));
        assert!(summary.contains("[PASS] value positive"));
        assert!(r.all_passed());
    }
}
