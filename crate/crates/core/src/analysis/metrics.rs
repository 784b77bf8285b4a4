use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::SimulationLog;
use crate::scenarios::TrackingTarget;

/// Summary of one run. Every key is always present; absent values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub method: String,
    pub completed: bool,
    pub fault: Option<String>,
    /// Last time reached by the log.
    pub t_final: f64,
    /// Per safety constraint, minimum over the integrator substeps.
    pub min_h: BTreeMap<String, f64>,
    pub final_tracking_error: Option<f64>,
    pub qp_count: usize,
    /// `∫‖u‖² dt` by the trapezoid rule over the logged samples.
    pub control_effort: f64,
    pub event_count: Option<usize>,
    pub event_gap_min: Option<f64>,
    pub event_gap_mean: Option<f64>,
    /// Time during which some safety function is negative.
    pub violation_duration: f64,
    pub control_min: Vec<f64>,
    pub control_max: Vec<f64>,
}

impl MetricsReport {
    /// Smallest value over all safety constraints.
    pub fn worst_h(&self) -> f64 {
        self.min_h.values().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn control_effort(log: &SimulationLog) -> f64 {
    let sq: Vec<f64> = log.controls.iter().map(|u| u.norm_squared()).collect();
    log.times
        .windows(2)
        .zip(sq.windows(2))
        .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
        .sum()
}

pub fn event_gaps(event_times: &[f64]) -> Vec<f64> {
    event_times.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn violation_duration(log: &SimulationLog) -> f64 {
    let d = &log.dense;
    (1..d.times.len())
        .filter(|&i| d.h_values.iter().any(|col| col[i] < 0.0))
        .map(|i| d.times[i] - d.times[i - 1])
        .fold(0.0, |a, b| a + b)
}

pub fn compute_metrics(
    scenario: &str,
    method: &str,
    log: &SimulationLog,
    tracking: &TrackingTarget,
    event_triggered: bool,
    fault: Option<String>,
) -> MetricsReport {
    let min_h = log
        .constraint_names
        .iter()
        .cloned()
        .zip(log.dense.min_h())
        .collect();
    let q = log.control_names.len();
    let mut control_min = vec![f64::INFINITY; q];
    let mut control_max = vec![f64::NEG_INFINITY; q];
    for u in &log.controls {
        for j in 0..q {
            control_min[j] = control_min[j].min(u[j]);
            control_max[j] = control_max[j].max(u[j]);
        }
    }
    // drop signed zeros from the report
    for v in control_min.iter_mut().chain(control_max.iter_mut()) {
        *v += 0.0;
    }
    let gaps = event_gaps(&log.event_times);
    let (event_count, event_gap_min, event_gap_mean) = if event_triggered {
        let min = gaps.iter().copied().reduce(f64::min);
        let mean = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
        (Some(log.event_times.len()), min, mean)
    } else {
        (None, None, None)
    };
    MetricsReport {
        scenario: scenario.to_string(),
        method: method.to_string(),
        completed: fault.is_none(),
        fault,
        t_final: log.times.last().copied().unwrap_or(0.0),
        min_h,
        final_tracking_error: log.states.last().map(|x| tracking.error(x)),
        qp_count: log.qp_count,
        control_effort: control_effort(log),
        event_count,
        event_gap_min,
        event_gap_mean,
        violation_duration: violation_duration(log),
        control_min,
        control_max,
    }
}
