use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One table row: a sequence and its BD-rate per column (e.g. Y, U, V).
#[derive(Clone, Debug, PartialEq)]
pub struct BdRow {
    pub sequence: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BdReport {
    pub columns: Vec<String>,
    pub rows: Vec<BdRow>,
}

impl BdReport {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, sequence: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.columns.len(), "row width must match columns");
        self.rows.push(BdRow {
            sequence: sequence.into(),
            values,
        });
    }

    /// Column means, or `None` for an empty report.
    pub fn average(&self) -> Option<Vec<f64>> {
        if self.rows.is_empty() {
            return None;
        }
        let n = self.rows.len() as f64;
        Some(
            (0..self.columns.len())
                .map(|c| self.rows.iter().map(|r| r.values[c]).sum::<f64>() / n)
                .collect(),
        )
    }

    fn header(&self) -> Vec<String> {
        std::iter::once("Sequence".to_string())
            .chain(self.columns.iter().cloned())
            .collect()
    }

    fn body(&self) -> Vec<Vec<String>> {
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}%")).collect::<Vec<_>>();
        let mut out: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| std::iter::once(r.sequence.clone()).chain(fmt(&r.values)).collect())
            .collect();
        if let Some(avg) = self.average() {
            out.push(std::iter::once("Average".to_string()).chain(fmt(&avg)).collect());
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for row in self.body() {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let header = self.header();
        let mut s = String::new();
        let _ = writeln!(s, "| {} |", header.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
        for row in self.body() {
            let _ = writeln!(s, "| {} |", row.join(" | "));
        }
        s
    }
}

/// Writes the report as CSV and/or Markdown to the given paths.
pub fn emit_report(report: &BdReport, csv_path: Option<&Path>, md_path: Option<&Path>) -> Result<()> {
    if let Some(p) = csv_path {
        std::fs::write(p, report.to_csv()?)?;
    }
    if let Some(p) = md_path {
        std::fs::write(p, report.to_markdown())?;
    }
    Ok(())
}
