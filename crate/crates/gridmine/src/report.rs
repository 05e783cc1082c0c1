//! Report rows: one fixed-schema CSV line per completed job, appended
//! atomically (write to a temp file, then rename).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Metrics;

pub const REPORT_HEADER: &str =
    "experiment,algorithm,m,parameters,result_count,quality_p,passes,elements,speedup";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub algorithm: String,
    pub m: usize,
    /// Compact `key=value` pairs joined by ';' so the CSV stays flat.
    pub parameters: String,
    pub result_count: usize,
    pub quality_p: Option<f64>,
    pub passes: Option<usize>,
    pub elements: usize,
    pub speedup: Option<f64>,
}

impl ReportRow {
    pub fn from_metrics(metrics: &Metrics, parameters: String) -> Self {
        ReportRow {
            experiment: metrics.experiment.clone(),
            algorithm: metrics.algorithm.clone(),
            m: metrics.m,
            parameters,
            result_count: metrics.result_count,
            quality_p: metrics.quality_p,
            passes: metrics.passes,
            elements: metrics.elements,
            speedup: metrics.speedup_estimate,
        }
    }

    pub fn csv_line(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{}",
            sanitize(&self.experiment),
            sanitize(&self.algorithm),
            self.m,
            sanitize(&self.parameters),
            self.result_count,
            opt(&self.quality_p),
            opt(&self.passes),
            self.elements,
            opt(&self.speedup),
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse(format!(
                "report row has {} fields, expected 9",
                fields.len()
            )));
        }
        fn opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<T>()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad field value {s}")))
        }
        Ok(ReportRow {
            experiment: fields[0].to_string(),
            algorithm: fields[1].to_string(),
            m: fields[2]
                .parse()
                .map_err(|_| Error::Parse("bad m".into()))?,
            parameters: fields[3].to_string(),
            result_count: fields[4]
                .parse()
                .map_err(|_| Error::Parse("bad result_count".into()))?,
            quality_p: opt(fields[5])?,
            passes: opt(fields[6])?,
            elements: fields[7]
                .parse()
                .map_err(|_| Error::Parse("bad elements".into()))?,
            speedup: opt(fields[8])?,
        })
    }
}

/// Free-text fields must not break the flat CSV.
fn sanitize(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Appends a row, creating the file with its header first. The updated
/// report is written to a temp file and renamed over the original so a
/// failed run never leaves a partial row behind.
pub fn append_row(path: &Path, row: &ReportRow) -> Result<()> {
    let mut content = match std::fs::read_to_string(path) {
        Ok(existing) => {
            if !existing.starts_with(REPORT_HEADER) {
                return Err(Error::Parse(format!(
                    "{} is not a report file",
                    path.display()
                )));
            }
            existing
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => format!("{REPORT_HEADER}\n"),
        Err(e) => return Err(e.into()),
    };
    content.push_str(&row.csv_line());
    content.push('\n');
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads all rows of a report file.
pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    match lines.next() {
        Some(header) if header == REPORT_HEADER => {}
        _ => {
            return Err(Error::Parse(format!(
                "{} is not a report file",
                path.display()
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(ReportRow::parse_line)
        .collect()
}
