//! Flat-file emission and ingestion: path CSVs, estimate records, and
//! experiment report tables.
//!
//! Floats are printed with 17 significant digits so that a written value
//! parses back to the identical bit pattern; estimation on a round-tripped
//! CSV therefore matches the in-process pipeline exactly. Given the same
//! configuration and seed, every writer below produces byte-identical
//! output (wall-clock metadata never reaches the files).

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Result, SfouError};
use crate::grid::{PathBatch, TimeGrid};
use crate::inference::EstimationResult;
use crate::montecarlo::{ExperimentKind, ExperimentReport};

/// Render a float with 17 significant digits (bit-faithful round trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a path batch as `rep,t,value` rows sorted by (rep, t).
pub fn write_paths_csv<W: Write + ?Sized>(out: &mut W, batch: &PathBatch) -> Result<()> {
    writeln!(out, "rep,t,value")?;
    let times = batch.grid.times();
    for (rep, row) in batch.values.iter().enumerate() {
        for (t, v) in times.iter().zip(row) {
            writeln!(out, "{rep},{},{}", fmt_f64(*t), fmt_f64(*v))?;
        }
    }
    Ok(())
}

/// Parse a `rep,t,value` CSV back into a grid and per-replicate rows.
/// Replicates must be contiguous and sorted, each carrying the same
/// uniform time column starting at 0.
pub fn read_paths_csv<R: BufRead>(input: R) -> Result<(TimeGrid, Vec<Vec<f64>>)> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(header)) if header.trim() == "rep,t,value" => {}
        Some(Ok(header)) => {
            return Err(SfouError::config(format!(
                "unexpected CSV header {header:?}, want \"rep,t,value\""
            )))
        }
        Some(Err(e)) => return Err(e.into()),
        None => return Err(SfouError::config("empty paths CSV")),
    }
    let mut grid_times: Vec<f64> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut parse = |what: &str| -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| SfouError::config(format!("line {}: missing {what}", lineno + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| SfouError::config(format!("line {}: bad {what}: {e}", lineno + 2)))
        };
        let rep = parse("rep")? as usize;
        let t = parse("t")?;
        let v = parse("value")?;
        if rep == values.len() {
            values.push(Vec::new());
        } else if rep + 1 != values.len() {
            return Err(SfouError::config(format!(
                "line {}: replicate indices must be contiguous and sorted, got {rep}",
                lineno + 2
            )));
        }
        let idx = values[rep].len();
        if rep == 0 {
            grid_times.push(t);
        } else if idx >= grid_times.len() || t != grid_times[idx] {
            return Err(SfouError::config(format!(
                "line {}: replicate {rep} deviates from the time column of replicate 0",
                lineno + 2
            )));
        }
        values[rep].push(v);
    }
    if values.is_empty() {
        return Err(SfouError::config("paths CSV contains no rows"));
    }
    if values.iter().any(|row| row.len() != grid_times.len()) {
        return Err(SfouError::config(
            "replicate row count does not match the time column",
        ));
    }
    if grid_times.len() < 3 {
        return Err(SfouError::config("paths CSV needs at least 3 grid points"));
    }
    if grid_times[0] != 0.0 {
        return Err(SfouError::config("time column must start at 0"));
    }
    let n = grid_times.len() - 1;
    let t_max = *grid_times.last().unwrap();
    let grid = TimeGrid::new(t_max, n)?;
    for (i, (a, b)) in grid.times().iter().zip(&grid_times).enumerate() {
        if (a - b).abs() > 1e-9 * t_max.max(1.0) {
            return Err(SfouError::config(format!(
                "time column is not the uniform grid at index {i}: {b} vs {a}"
            )));
        }
    }
    Ok((grid, values))
}

/// One estimate per replicate, flat for easy ingestion.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRecord {
    pub rep: usize,
    pub theta_hat: f64,
    pub obs_info: f64,
    pub log_lik: f64,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub n: usize,
    #[serde(rename = "H")]
    pub h: f64,
}

impl EstimateRecord {
    pub fn from_result(rep: usize, r: &EstimationResult) -> Self {
        EstimateRecord {
            rep,
            theta_hat: r.theta_hat,
            obs_info: r.obs_info,
            log_lik: r.log_lik_at_hat,
            t_max: r.grid.t_max(),
            n: r.grid.steps(),
            h: r.h,
        }
    }
}

pub fn write_estimates_json<W: Write + ?Sized>(out: &mut W, records: &[EstimateRecord]) -> Result<()> {
    let text = serde_json::to_string_pretty(records)?;
    writeln!(out, "{text}")?;
    Ok(())
}

pub fn write_estimates_csv<W: Write + ?Sized>(out: &mut W, records: &[EstimateRecord]) -> Result<()> {
    writeln!(out, "rep,theta_hat,obs_info,log_lik,T,n,H")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.rep,
            fmt_f64(r.theta_hat),
            fmt_f64(r.obs_info),
            fmt_f64(r.log_lik),
            fmt_f64(r.t_max),
            r.n,
            fmt_f64(r.h)
        )?;
    }
    Ok(())
}

/// Conditional-mean prediction for one replicate.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionRecord {
    pub rep: usize,
    pub predicted: f64,
    pub a: f64,
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

pub fn write_predictions_json<W: Write + ?Sized>(out: &mut W, records: &[PredictionRecord]) -> Result<()> {
    let text = serde_json::to_string_pretty(records)?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Experiment report as a CSV table. Headers per experiment:
///
/// ```text
/// consistency:  T,median_abs_err,median_obs_info,pass
/// normality:    T,ks,eta2_hat,pass
/// berry-esseen: T,delta,eps,ks,p_cond,bound,pass
/// tail:         T,d,delta,eps,p_cond,empirical,bound,pass
/// ```
pub fn write_report_csv<W: Write + ?Sized>(out: &mut W, report: &ExperimentReport) -> Result<()> {
    match report.experiment {
        ExperimentKind::Consistency => {
            writeln!(out, "T,median_abs_err,median_obs_info,pass")?;
            for h in &report.horizons {
                writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_f64(h.t_max),
                    fmt_f64(h.median_abs_error.unwrap_or(f64::NAN)),
                    fmt_f64(h.median_obs_info.unwrap_or(f64::NAN)),
                    fmt_bool(h.pass)
                )?;
            }
        }
        ExperimentKind::Normality => {
            writeln!(out, "T,ks,eta2_hat,pass")?;
            for h in &report.horizons {
                writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_f64(h.t_max),
                    fmt_f64(h.ks.unwrap_or(f64::NAN)),
                    fmt_f64(h.eta2_hat.unwrap_or(f64::NAN)),
                    fmt_bool(h.pass)
                )?;
            }
        }
        ExperimentKind::BerryEsseen => {
            writeln!(out, "T,delta,eps,ks,p_cond,bound,pass")?;
            for h in &report.horizons {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(h.t_max),
                    fmt_f64(h.delta.unwrap_or(f64::NAN)),
                    fmt_f64(h.eps.unwrap_or(f64::NAN)),
                    fmt_f64(h.ks.unwrap_or(f64::NAN)),
                    fmt_f64(h.p_cond.unwrap_or(f64::NAN)),
                    fmt_f64(h.bound.unwrap_or(f64::NAN)),
                    fmt_bool(h.pass)
                )?;
            }
        }
        ExperimentKind::Tail => {
            writeln!(out, "T,d,delta,eps,p_cond,empirical,bound,pass")?;
            for h in &report.horizons {
                for t in &h.tail {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        fmt_f64(h.t_max),
                        fmt_f64(t.d),
                        fmt_f64(h.delta.unwrap_or(f64::NAN)),
                        fmt_f64(h.eps.unwrap_or(f64::NAN)),
                        fmt_f64(h.p_cond.unwrap_or(f64::NAN)),
                        fmt_f64(t.empirical),
                        fmt_f64(t.bound),
                        fmt_bool(t.pass)
                    )?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_report_json<W: Write + ?Sized>(out: &mut W, report: &ExperimentReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    writeln!(out, "{text}")?;
    Ok(())
}
