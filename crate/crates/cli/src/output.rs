//! CSV files written by the runner. Column names are fixed; see the README.
//!
//! Optional numbers are written as empty fields.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const LOSS_FILE: &str = "loss.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.toml";
pub const EVAL_FILE: &str = "eval.csv";

pub const LOSS_COLUMNS: [&str; 4] = ["iteration", "loss", "y0", "wall_ms"];
pub const SUMMARY_COLUMNS: [&str; 15] = [
    "problem",
    "method",
    "n",
    "ntilde",
    "seed",
    "iterations",
    "converged",
    "y0_init",
    "y0",
    "oracle",
    "abs_err",
    "rel_err",
    "test_loss",
    "wall_ms",
    "total_ms",
];
pub const REPORT_COLUMNS: [&str; 8] = ["problem", "method", "n", "ntilde", "y0", "oracle", "abs_err", "wall_ms"];
pub const EVAL_COLUMNS: [&str; 8] = ["problem", "method", "n", "ntilde", "n_test", "y0", "oracle", "test_loss"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub iteration: usize,
    pub loss: f64,
    /// `Y_0` after this iteration's update.
    pub y0: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub method: String,
    pub n: usize,
    pub ntilde: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub y0_init: f64,
    pub y0: f64,
    pub oracle: Option<f64>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    pub test_loss: Option<f64>,
    /// Mean wall time per iteration.
    pub wall_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub problem: String,
    pub method: String,
    pub n: usize,
    pub ntilde: usize,
    pub y0: f64,
    pub oracle: Option<f64>,
    pub abs_err: Option<f64>,
    pub wall_ms: f64,
}

impl From<&SummaryRow> for ReportRow {
    fn from(s: &SummaryRow) -> Self {
        ReportRow {
            problem: s.problem.clone(),
            method: s.method.clone(),
            n: s.n,
            ntilde: s.ntilde,
            y0: s.y0,
            oracle: s.oracle,
            abs_err: s.abs_err,
            wall_ms: s.wall_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub problem: String,
    pub method: String,
    pub n: usize,
    pub ntilde: usize,
    pub n_test: usize,
    pub y0: f64,
    pub oracle: Option<f64>,
    pub test_loss: f64,
}

/// Writes the header, then one line per row (header only when `rows` is empty).
pub fn write_rows<W: Write, T: Serialize>(w: W, columns: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(columns)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_file<T: Serialize>(path: &Path, columns: &[&str], rows: &[T]) -> Result<(), CliError> {
    write_rows(File::create(path)?, columns, rows)
}

pub fn read_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}
