//! Per-iteration convergence series and its CSV form.
//!
//! The CSV layout is fixed: header `iteration,best_cost,mean_cost`, one row
//! per iteration, costs with six decimals, LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "iteration,best_cost,mean_cost";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
}

/// Best-so-far and population-mean cost per iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            rows: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, iteration: usize, best_cost: f64, mean_cost: f64) {
        self.rows.push(TraceRow {
            iteration,
            best_cost,
            mean_cost,
        });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_best(&self) -> Option<f64> {
        self.rows.last().map(|r| r.best_cost)
    }

    pub fn is_best_non_increasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].best_cost <= w[0].best_cost)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6},{:.6}", r.iteration, r.best_cost, r.mean_cost);
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("convergence trace is empty")]
    Empty,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed CSV {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("malformed CSV {path}: unexpected header {found:?}")]
    Header { path: String, found: Vec<String> },
}

pub fn write_convergence_csv(trace: &ConvergenceTrace, path: &Path) -> Result<(), TraceIoError> {
    if trace.is_empty() {
        return Err(TraceIoError::Empty);
    }
    fs::write(path, trace.to_csv_string()).map_err(|source| TraceIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_convergence_csv(path: &Path) -> Result<ConvergenceTrace, TraceIoError> {
    let display = || path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| TraceIoError::Csv {
        path: display(),
        source,
    })?;
    let headers = reader.headers().map_err(|source| TraceIoError::Csv {
        path: display(),
        source,
    })?;
    if headers.iter().ne(CSV_HEADER.split(',')) {
        return Err(TraceIoError::Header {
            path: display(),
            found: headers.iter().map(str::to_owned).collect(),
        });
    }
    let mut trace = ConvergenceTrace::default();
    for row in reader.deserialize() {
        let row: TraceRow = row.map_err(|source| TraceIoError::Csv {
            path: display(),
            source,
        })?;
        trace.rows.push(row);
    }
    Ok(trace)
}
