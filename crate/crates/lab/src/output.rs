//! CSV and JSON writers.
//!
//! CSV columns per report:
//!
//! * `simulate`: `k,series,v0..v{d-1}` with `series` in `{x, y}`;
//! * `estimate`: `sample_size,h,m,n,n_eff,row,c0..`, one line per kernel row,
//!   padded with empty fields to the widest block;
//! * `bounds`, `verify`, `eigen`, `ywfit`, `suite`: one line per row struct,
//!   columns named after its fields.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::LabResult;
use crate::experiments::{BoundsTable, EigenReport, EstimateReport, McSummary, SimulateReport, YwReport};
use crate::suites::SuiteReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A report that can be written in either format.
pub trait Report: Serialize {
    /// File stem used under `--out`.
    fn name(&self) -> &'static str;
    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()>;
}

fn rows_csv<T: Serialize>(rows: &[T], out: &mut dyn Write) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

impl Report for SimulateReport {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string(), "series".to_string()];
        header.extend((0..self.nodes.len()).map(|i| format!("v{i}")));
        w.write_record(&header)?;
        let mut emit = |label: &str, series: &[Vec<f64>]| -> LabResult<()> {
            for (k, values) in series.iter().enumerate() {
                let mut rec = vec![(k + 1).to_string(), label.to_string()];
                rec.extend(values.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            Ok(())
        };
        emit("x", &self.xs)?;
        if let Some(ys) = &self.ys {
            emit("y", ys)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Report for EstimateReport {
    fn name(&self) -> &'static str {
        "estimate"
    }

    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()> {
        let width = self.blocks.iter().map(|b| b.kernel.first().map_or(0, Vec::len)).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["sample_size", "h", "m", "n", "n_eff", "row"].iter().map(|s| s.to_string()).collect();
        header.extend((0..width).map(|i| format!("c{i}")));
        w.write_record(&header)?;
        for b in &self.blocks {
            for (i, row) in b.kernel.iter().enumerate() {
                let mut rec = vec![
                    b.sample_size.to_string(),
                    b.lag.to_string(),
                    b.m.to_string(),
                    b.n.to_string(),
                    b.n_eff.to_string(),
                    i.to_string(),
                ];
                rec.extend(row.iter().map(|v| v.to_string()));
                rec.resize(6 + width, String::new());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl Report for BoundsTable {
    fn name(&self) -> &'static str {
        "bounds"
    }

    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()> {
        rows_csv(&self.rows, out)
    }
}

impl Report for McSummary {
    fn name(&self) -> &'static str {
        "verify"
    }

    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()> {
        rows_csv(&self.rows, out)
    }
}

impl Report for EigenReport {
    fn name(&self) -> &'static str {
        "eigen"
    }

    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()> {
        rows_csv(&self.rows, out)
    }
}

impl Report for YwReport {
    fn name(&self) -> &'static str {
        "ywfit"
    }

    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()> {
        rows_csv(&self.rows, out)
    }
}

impl Report for SuiteReport {
    fn name(&self) -> &'static str {
        "suite"
    }

    fn write_csv(&self, out: &mut dyn Write) -> LabResult<()> {
        rows_csv(&self.checks, out)
    }
}

pub fn render(report: &dyn ReportDyn, format: Format) -> LabResult<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => report.csv(&mut buf)?,
        Format::Json => {
            report.json(&mut buf)?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

/// Object-safe view of [`Report`].
pub trait ReportDyn {
    fn stem(&self) -> &'static str;
    fn csv(&self, out: &mut dyn Write) -> LabResult<()>;
    fn json(&self, out: &mut dyn Write) -> LabResult<()>;
}

impl<T: Report> ReportDyn for T {
    fn stem(&self) -> &'static str {
        self.name()
    }

    fn csv(&self, out: &mut dyn Write) -> LabResult<()> {
        self.write_csv(out)
    }

    fn json(&self, out: &mut dyn Write) -> LabResult<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Write the report to `dir/<name>.<ext>`, or to stdout without a directory.
pub fn emit(report: &dyn ReportDyn, format: Format, dir: Option<&Path>) -> LabResult<Option<PathBuf>> {
    let bytes = render(report, format)?;
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.{}", report.stem(), format.extension()));
            std::fs::write(&path, bytes)?;
            Ok(Some(path))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
            Ok(None)
        }
    }
}
