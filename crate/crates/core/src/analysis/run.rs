use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::certificates::{complex_roots, psi1_with_gain, ClassKSpec};
use crate::controller::{
    ControllerConfig, ControllerFault, Method, MethodSelector, StepRecord, TimeDrivenPolicy,
};
use crate::dynamics::{run_closed_loop, LoopError, LoopFailure, SimulationLog};
use crate::event_trigger::{EventTriggerConfig, EventTriggeredPolicy, StateBox};
use crate::scenarios::{
    default_configs, make_acc, make_robot, ScenarioKind, ScenarioParams, ScenarioSpec,
};

use super::config::RunConfig;
use super::io::{write_events, write_json, write_psi1, write_trajectory, Psi1Sample};
use super::metrics::{compute_metrics, MetricsReport};
use super::plot::{complex_plane, stacked, xy_path, Panel, Series};
use super::AnalysisError;

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub scenario: ScenarioKind,
    pub method: Method,
    pub config: RunConfig,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl RunRequest {
    pub fn new(scenario: ScenarioKind, method: Method) -> Self {
        Self {
            scenario,
            method,
            config: RunConfig::default(),
            out_dir: None,
            seed: 0,
        }
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.scenario.as_str(), self.method.as_str())
    }
}

/// A request with every default filled in.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub spec: ScenarioSpec,
    pub controller: ControllerConfig,
    pub event: EventTriggerConfig,
    /// Sampling period of the closed loop (monitor period for event-triggered runs).
    pub loop_dt: f64,
    /// Step inside the ZOH-TLC rows.
    pub row_dt: f64,
    /// Invented defaults left untouched by the user.
    pub invented: Vec<String>,
}

pub fn resolve(req: &RunRequest) -> Result<ResolvedRun, AnalysisError> {
    let spec = match req.scenario {
        ScenarioKind::Acc => make_acc(req.config.acc.clone()),
        ScenarioKind::Robot => make_robot(req.config.robot.clone()),
    }
    .map_err(|e| AnalysisError::Config(e.to_string()))?;
    let defaults = default_configs(&spec);
    let o = &req.config.controller;
    let gains = match &o.hocbf_gains {
        Some(g) => ClassKSpec::new(g.clone()).map_err(|e| AnalysisError::Config(e.to_string()))?,
        None => defaults.hocbf_gains.clone(),
    };
    let method = match req.method {
        Method::Hocbf => MethodSelector::Hocbf(gains),
        Method::Tlc => MethodSelector::ZohTlc,
        Method::Etlc => MethodSelector::EventTlc,
    };
    let controller = ControllerConfig {
        w: o.w.unwrap_or(defaults.controller.w),
        substeps: o.substeps.unwrap_or(defaults.controller.substeps),
        method,
        ..defaults.controller
    };
    controller
        .validate()
        .map_err(|e| AnalysisError::Config(e.to_string()))?;
    let event = EventTriggerConfig {
        grid_per_dim: o.grid_per_dim.unwrap_or(defaults.event.grid_per_dim),
        row_dt: o.row_dt.or(defaults.event.row_dt),
        ..defaults.event
    };
    let (loop_dt, row_dt) = match req.method {
        Method::Etlc => (event.monitor_dt, event.row_dt.unwrap_or(controller.dt)),
        _ => (controller.dt, controller.dt),
    };
    let invented = defaults
        .invented
        .iter()
        .filter(|k| !req.config.is_explicit(k))
        .map(|k| k.to_string())
        .collect();
    Ok(ResolvedRun {
        spec,
        controller,
        event,
        loop_dt,
        row_dt,
        invented,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub metrics: MetricsReport,
    pub log: SimulationLog,
    pub fault: Option<ControllerFault>,
    pub psi1: Vec<Psi1Sample>,
    pub records: Vec<StepRecord>,
    /// Event-triggered runs only: the box in force after each event.
    pub boxes: Vec<(f64, StateBox)>,
    pub resolved: ResolvedRun,
}

/// `L_f h + p1·h` along the log for the first safety constraint of relative
/// degree two or more. HOCBF uses its real first gain; the TLC methods use
/// `(1 - i)/Δt`.
pub fn psi1_series(
    spec: &ScenarioSpec,
    log: &SimulationLog,
    method: &MethodSelector,
    row_dt: f64,
) -> Result<Vec<Psi1Sample>, AnalysisError> {
    let Some(chain) = spec.safety.iter().find(|c| c.degree() >= 2) else {
        return Ok(Vec::new());
    };
    let gain = match method {
        MethodSelector::Hocbf(g) => Complex64::new(g.gains()[0], 0.0),
        _ => complex_roots(row_dt)
            .map_err(|e| AnalysisError::Config(e.to_string()))?
            .p1,
    };
    log.times
        .iter()
        .zip(&log.states)
        .map(|(t, x)| {
            let psi = psi1_with_gain(chain, x, gain).map_err(|e| AnalysisError::Simulation(e.to_string()))?;
            Ok(Psi1Sample {
                t: *t,
                re: psi.re,
                im: psi.im,
                h: chain.value(x).map_err(|e| AnalysisError::Simulation(e.to_string()))?,
            })
        })
        .collect()
}

fn split(
    result: Result<SimulationLog, LoopFailure<ControllerFault>>,
) -> Result<(SimulationLog, Option<ControllerFault>), AnalysisError> {
    match result {
        Ok(log) => Ok((log, None)),
        Err(LoopFailure {
            error: LoopError::Controller { fault, .. },
            partial,
        }) => Ok((partial, Some(fault))),
        Err(other) => Err(AnalysisError::Simulation(other.to_string())),
    }
}

/// Runs the closed loop without touching the file system.
pub fn simulate(req: &RunRequest) -> Result<RunOutcome, AnalysisError> {
    let resolved = resolve(req)?;
    let spec = &resolved.spec;
    let substeps = resolved.controller.substeps;
    let (log, fault, records, boxes) = match req.method {
        Method::Etlc => {
            let mut policy =
                EventTriggeredPolicy::new(spec, resolved.controller.clone(), resolved.event.clone())
                    .map_err(|e| AnalysisError::Config(e.to_string()))?;
            let (log, fault) = split(run_closed_loop(
                &spec.system,
                &mut policy,
                &spec.x0,
                spec.t_end,
                resolved.loop_dt,
                substeps,
            ))?;
            (log, fault, policy.records().to_vec(), policy.boxes().to_vec())
        }
        _ => {
            let mut policy = TimeDrivenPolicy::new(spec, resolved.controller.clone())
                .map_err(|e| AnalysisError::Config(e.to_string()))?;
            let (log, fault) = split(run_closed_loop(
                &spec.system,
                &mut policy,
                &spec.x0,
                spec.t_end,
                resolved.loop_dt,
                substeps,
            ))?;
            (log, fault, policy.records().to_vec(), Vec::new())
        }
    };
    let metrics = compute_metrics(
        req.scenario.as_str(),
        req.method.as_str(),
        &log,
        &spec.tracking,
        req.method == Method::Etlc,
        fault.as_ref().map(|f| f.to_string()),
    );
    let psi1 = psi1_series(spec, &log, &resolved.controller.method, resolved.row_dt)?;
    Ok(RunOutcome {
        label: req.label(),
        metrics,
        log,
        fault,
        psi1,
        records,
        boxes,
        resolved,
    })
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    scenario: &'a str,
    method: &'a str,
    seed: u64,
    params: &'a ScenarioParams,
    controller: &'a ControllerConfig,
    event: Option<&'a EventTriggerConfig>,
    loop_dt: f64,
    row_dt: f64,
    invented_defaults: &'a [String],
}

/// Writes every artifact of a run into `dir`.
pub fn write_outputs(dir: &Path, req: &RunRequest, out: &RunOutcome) -> Result<(), AnalysisError> {
    std::fs::create_dir_all(dir)?;
    let r = &out.resolved;
    write_json(
        &dir.join("config.json"),
        &ConfigEcho {
            scenario: req.scenario.as_str(),
            method: req.method.as_str(),
            seed: req.seed,
            params: &r.spec.params,
            controller: &r.controller,
            event: (req.method == Method::Etlc).then_some(&r.event),
            loop_dt: r.loop_dt,
            row_dt: r.row_dt,
            invented_defaults: &r.invented,
        },
    )?;
    write_trajectory(&dir.join("trajectory.csv"), &out.log)?;
    write_psi1(&dir.join("psi1.csv"), &out.psi1)?;
    if req.method == Method::Etlc {
        write_events(&dir.join("events.csv"), &out.log.event_times)?;
    }
    write_json(&dir.join("metrics.json"), &out.metrics)?;
    let fault_path = dir.join("fault.json");
    match &out.fault {
        Some(f) => write_json(&fault_path, f)?,
        None if fault_path.exists() => std::fs::remove_file(&fault_path)?,
        None => {}
    }
    write_plots(dir, out)?;
    Ok(())
}

fn write_plots(dir: &Path, out: &RunOutcome) -> Result<(), AnalysisError> {
    let log = &out.log;
    let states: Vec<Vec<f64>> = (0..log.state_names.len()).map(|i| log.state_series(i)).collect();
    let controls: Vec<Vec<f64>> = (0..log.control_names.len())
        .map(|j| log.controls.iter().map(|u| u[j]).collect())
        .collect();
    let mut panels = Vec::new();
    for (name, y) in log.state_names.iter().zip(&states) {
        panels.push(Panel {
            title: format!("state {name}"),
            series: vec![Series { label: name, x: &log.times, y }],
            reference: None,
        });
    }
    for (name, y) in log.control_names.iter().zip(&controls) {
        panels.push(Panel {
            title: format!("control {name}"),
            series: vec![Series { label: name, x: &log.times, y }],
            reference: None,
        });
    }
    for (name, y) in log.constraint_names.iter().zip(&log.dense.h_values) {
        panels.push(Panel {
            title: format!("safety {name}"),
            series: vec![Series { label: name, x: &log.dense.times, y }],
            reference: Some(0.0),
        });
    }
    std::fs::write(dir.join("timeseries.svg"), stacked(&panels))?;

    let re: Vec<f64> = out.psi1.iter().map(|s| s.re).collect();
    let im: Vec<f64> = out.psi1.iter().map(|s| s.im).collect();
    std::fs::write(
        dir.join("psi1.svg"),
        complex_plane(
            &format!("psi1 ({})", out.metrics.method),
            &[Series { label: "psi1", x: &re, y: &im }],
        ),
    )?;

    if let ScenarioParams::Robot(p) = &out.resolved.spec.params {
        std::fs::write(
            dir.join("path.svg"),
            xy_path(
                "robot path",
                &states[0],
                &states[1],
                &[(p.x_o, p.y_o, p.r), (p.x_o, p.y_o, p.r_body)],
                Some((p.x_d, p.y_d)),
            ),
        )?;
    }
    Ok(())
}

/// Simulates and, when the request names an output directory, writes artifacts.
pub fn run(req: &RunRequest) -> Result<RunOutcome, AnalysisError> {
    let out = simulate(req)?;
    if let Some(dir) = &req.out_dir {
        write_outputs(dir, req, &out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub scenario: String,
    pub labels: Vec<String>,
    pub metrics: Vec<MetricsReport>,
    /// Labels of runs whose safety functions went negative.
    pub violates_safety: Vec<String>,
    /// Labels of runs that stopped on a controller fault.
    pub faulted: Vec<String>,
    /// Label of the completed run with the fewest QP solves.
    pub fewest_qps: Option<String>,
}

fn unique_labels(requests: &[RunRequest]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    requests
        .iter()
        .map(|r| {
            let base = r.label();
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}_{n}")
            }
        })
        .collect()
}

/// Runs every request (in parallel) and tabulates the metrics.
pub fn compare(requests: &[RunRequest], out_dir: Option<&Path>) -> Result<Comparison, AnalysisError> {
    if requests.len() < 2 {
        return Err(AnalysisError::Config("compare needs at least two requests".into()));
    }
    let scenario = requests[0].scenario;
    if requests.iter().any(|r| r.scenario != scenario) {
        return Err(AnalysisError::Config("compare requests must share one scenario".into()));
    }
    let labels = unique_labels(requests);
    let outcomes: Vec<RunOutcome> = requests
        .par_iter()
        .zip(labels.par_iter())
        .map(|(req, label)| {
            let mut req = req.clone();
            req.out_dir = out_dir.map(|d| d.join(label));
            run(&req)
        })
        .collect::<Result<_, _>>()?;
    let metrics: Vec<MetricsReport> = outcomes.iter().map(|o| o.metrics.clone()).collect();
    let violates_safety = labels
        .iter()
        .zip(&metrics)
        .filter(|(_, m)| m.worst_h() < 0.0)
        .map(|(l, _)| l.clone())
        .collect();
    let faulted = labels
        .iter()
        .zip(&metrics)
        .filter(|(_, m)| !m.completed)
        .map(|(l, _)| l.clone())
        .collect();
    let fewest_qps = labels
        .iter()
        .zip(&metrics)
        .filter(|(_, m)| m.completed)
        .min_by_key(|(_, m)| m.qp_count)
        .map(|(l, _)| l.clone());
    let cmp = Comparison {
        scenario: scenario.as_str().to_string(),
        labels,
        metrics,
        violates_safety,
        faulted,
        fewest_qps,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_comparison_csv(&dir.join("comparison.csv"), &cmp)?;
        std::fs::write(dir.join("comparison.txt"), comparison_text(&cmp))?;
        write_json(&dir.join("comparison.json"), &cmp)?;
    }
    Ok(cmp)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

fn comparison_columns(cmp: &Comparison) -> (Vec<String>, Vec<Vec<String>>) {
    let constraint_names: Vec<String> = cmp
        .metrics
        .first()
        .map(|m| m.min_h.keys().cloned().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["run", "completed", "t_final", "qp_count"].map(String::from).to_vec();
    header.extend(constraint_names.iter().map(|n| format!("min_h_{n}")));
    header.extend(
        [
            "violation_duration",
            "final_tracking_error",
            "control_effort",
            "event_gap_min",
            "event_gap_mean",
            "violates_safety",
        ]
        .map(String::from),
    );
    let rows = cmp
        .labels
        .iter()
        .zip(&cmp.metrics)
        .map(|(l, m)| {
            let mut row = vec![
                l.clone(),
                m.completed.to_string(),
                format!("{:.6e}", m.t_final),
                m.qp_count.to_string(),
            ];
            row.extend(constraint_names.iter().map(|n| opt(m.min_h.get(n).copied())));
            row.extend([
                format!("{:.6e}", m.violation_duration),
                opt(m.final_tracking_error),
                format!("{:.6e}", m.control_effort),
                opt(m.event_gap_min),
                opt(m.event_gap_mean),
                (m.worst_h() < 0.0).to_string(),
            ]);
            row
        })
        .collect();
    (header, rows)
}

fn write_comparison_csv(path: &Path, cmp: &Comparison) -> Result<(), AnalysisError> {
    let (header, rows) = comparison_columns(cmp);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn comparison_text(cmp: &Comparison) -> String {
    let (header, rows) = comparison_columns(cmp);
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = format!("scenario: {}\n{}\n", cmp.scenario, line(&header));
    for r in &rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    let list = |v: &[String]| if v.is_empty() { "none".to_string() } else { v.join(", ") };
    out.push_str(&format!("violates safety: {}\n", list(&cmp.violates_safety)));
    out.push_str(&format!("controller fault: {}\n", list(&cmp.faulted)));
    out.push_str(&format!(
        "fewest QPs: {}\n",
        cmp.fewest_qps.as_deref().unwrap_or("none")
    ));
    out
}
