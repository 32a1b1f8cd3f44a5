//! JSON reports and CSV export of simulation results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::mclab::SimulationReport;

/// JSON schema of [`SimulationReport`] (`report_schema_v1`).
pub const REPORT_SCHEMA_JSON: &str = include_str!("../../schemas/report_schema_v1.json");

/// Pretty-printed JSON with a trailing newline. Field order is fixed, so
/// equal reports serialize to identical bytes.
pub fn report_to_json(report: &SimulationReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report(report: &SimulationReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, report_to_json(report)?)?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<SimulationReport> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

fn token(out: &mut String, x: f64) {
    let _ = write!(out, "{x:?}");
}

/// Writes `{stat}_n{n}.csv` (`replicate,value`) and `{stat}_n{n}_hist.csv`
/// (`lower,upper,count`) for every statistic and sample size. Returns the
/// paths written.
pub fn write_csv(report: &SimulationReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for size in &report.sizes {
        for (name, summary) in &size.statistics {
            let mut values = String::from("replicate,value\n");
            for r in &size.replicates {
                let v = match name.as_str() {
                    "norm_f" => r.norm_f,
                    "dbw" => r.dbw,
                    "variance" => r.variance,
                    "rel_err" => r.rel_err,
                    _ => r.dbw_raw,
                };
                let _ = write!(values, "{},", r.replicate);
                token(&mut values, v);
                values.push('\n');
            }
            let path = dir.join(format!("{name}_n{}.csv", size.n));
            fs::write(&path, values)?;
            written.push(path);

            let h = &summary.histogram;
            let mut hist = String::from("lower,upper,count\n");
            for (k, c) in h.counts.iter().enumerate() {
                token(&mut hist, h.edges[k]);
                hist.push(',');
                token(&mut hist, h.edges[k + 1]);
                let _ = writeln!(hist, ",{c}");
            }
            let path = dir.join(format!("{name}_n{}_hist.csv", size.n));
            fs::write(&path, hist)?;
            written.push(path);
        }
    }
    Ok(written)
}
