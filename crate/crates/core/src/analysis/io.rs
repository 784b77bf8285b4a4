use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::SimulationLog;

use super::AnalysisError;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_header(log: &SimulationLog) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(log.state_names.iter().cloned());
    h.extend(log.control_names.iter().cloned());
    h.push("slack".to_string());
    h.extend(log.constraint_names.iter().map(|n| format!("h_{n}")));
    h
}

pub fn trajectory_rows(log: &SimulationLog) -> Vec<Vec<f64>> {
    (0..log.len())
        .map(|k| {
            let mut row = vec![log.times[k]];
            row.extend(log.states[k].iter());
            row.extend(log.controls[k].iter());
            row.push(log.slack[k]);
            row.extend(log.h_values.iter().map(|col| col[k]));
            row
        })
        .collect()
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(path: &Path, log: &SimulationLog) -> Result<(), AnalysisError> {
    write_table(path, &trajectory_header(log), &trajectory_rows(log))
}

/// A numeric CSV read back into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a CSV whose cells are all numbers (empty cells become NaN).
pub fn read_table(path: &Path) -> Result<Table, AnalysisError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>()
                        .map_err(|e| AnalysisError::Parse(format!("`{c}` in {}: {e}", path.display())))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psi1Sample {
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub h: f64,
}

pub fn write_psi1(path: &Path, samples: &[Psi1Sample]) -> Result<(), AnalysisError> {
    let header = ["t", "psi1_re", "psi1_im", "h"].map(String::from);
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.t, s.re, s.im, s.h]).collect();
    write_table(path, &header, &rows)
}

pub fn write_events(path: &Path, event_times: &[f64]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["event_index", "t", "inter_event_gap"])?;
    for (i, t) in event_times.iter().enumerate() {
        let gap = if i == 0 {
            String::new()
        } else {
            fmt_f64(t - event_times[i - 1])
        };
        w.write_record([i.to_string(), fmt_f64(*t), gap])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AnalysisError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
