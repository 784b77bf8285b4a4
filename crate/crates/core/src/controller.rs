//! Per-step safety-filter QPs and the time-driven zero-order-hold policy.
//!
//! The decision vector is `(u, δ)`: controls followed by one slack shared by
//! every stability row. The objective is `‖u‖² + w·δ²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{
    clf_row, hocbf_row, zoh_tlc_row, zoh_tls_row, CertificateError, ClassKSpec, HalfspaceRow,
    LieDerivativeChain, RowSense,
};
use crate::dynamics::{ControlBox, ControlPolicy, ControlVector, StateVector, StepDecision};
use crate::event_trigger::{RobustRow, StateBox};
use crate::qp::{solve, QpError, QpRow, QpSolution, QpStatus, QuadraticProgram};
use crate::scenarios::{ScenarioSpec, StabilityConstraint, StabilityKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hocbf,
    Tlc,
    Etlc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hocbf => "hocbf",
            Method::Tlc => "tlc",
            Method::Etlc => "etlc",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hocbf" => Ok(Method::Hocbf),
            "tlc" => Ok(Method::Tlc),
            "etlc" => Ok(Method::Etlc),
            other => Err(format!("unknown method `{other}` (expected hocbf, tlc or etlc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSelector {
    ZohTlc,
    Hocbf(ClassKSpec),
    EventTlc,
}

impl MethodSelector {
    pub fn method(&self) -> Method {
        match self {
            MethodSelector::ZohTlc => Method::Tlc,
            MethodSelector::Hocbf(_) => Method::Hocbf,
            MethodSelector::EventTlc => Method::Etlc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub dt: f64,
    pub w: f64,
    pub substeps: usize,
    pub method: MethodSelector,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ControllerError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.w > 0.0) || !self.w.is_finite() {
            return Err(ControllerError::InvalidConfig(format!(
                "w must be positive, got {}",
                self.w
            )));
        }
        if self.substeps == 0 {
            return Err(ControllerError::InvalidConfig("substeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("row {index} has {got} control coefficients, expected {expected}")]
    RowDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Lifts rows onto `(u, δ)` and adds the control box.
pub fn build_step_qp(
    rows: &[HalfspaceRow],
    control_box: &ControlBox,
    w: f64,
) -> Result<QuadraticProgram, ControllerError> {
    let q = control_box.dim();
    let dim = q + 1;
    let mut hessian = DMatrix::identity(dim, dim);
    hessian[(q, q)] = w;
    let mut lower = DVector::from_element(dim, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(dim, f64::INFINITY);
    lower.rows_mut(0, q).copy_from(control_box.lower());
    upper.rows_mut(0, q).copy_from(control_box.upper());
    let mut qp = QuadraticProgram::new(hessian, DVector::zeros(dim)).with_bounds(lower, upper);
    for (index, row) in rows.iter().enumerate() {
        if row.a.len() != q {
            return Err(ControllerError::RowDimension {
                index,
                expected: q,
                got: row.a.len(),
            });
        }
        let slack = if row.slack_coupled { 1.0 } else { 0.0 };
        let (mut normal, offset): (Vec<f64>, f64) = match row.sense {
            RowSense::Geq => (row.a.clone(), row.b),
            RowSense::Leq => (row.a.iter().map(|a| -a).collect(), -row.b),
        };
        normal.push(slack);
        qp.rows.push(QpRow::new(normal, offset));
    }
    Ok(qp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub control: ControlVector,
    pub slack: f64,
    pub qp: QpSolution,
}

/// Builds and solves one step QP. `Ok(None)` means infeasible.
pub fn solve_step(
    rows: &[HalfspaceRow],
    control_box: &ControlBox,
    w: f64,
) -> Result<Option<StepSolution>, ControllerError> {
    let qp = build_step_qp(rows, control_box, w)?;
    let sol = solve(&qp)?;
    if sol.status == QpStatus::Infeasible {
        return Ok(None);
    }
    let q = control_box.dim();
    let control = control_box.clamp(&sol.point.rows(0, q).into_owned());
    Ok(Some(StepSolution {
        control,
        slack: sol.point[q],
        qp: sol,
    }))
}

/// Safety row for one chain under a time-driven method.
pub fn safety_row(
    chain: &LieDerivativeChain,
    x: &StateVector,
    method: &MethodSelector,
    dt: f64,
) -> Result<HalfspaceRow, CertificateError> {
    match method {
        MethodSelector::Hocbf(spec) => {
            let spec = spec.truncated(chain.degree())?;
            hocbf_row(chain, x, &spec)
        }
        MethodSelector::ZohTlc | MethodSelector::EventTlc => zoh_tlc_row(chain, x, dt),
    }
}

pub fn stability_row(
    constraint: &StabilityConstraint,
    x: &StateVector,
    dt: f64,
) -> Result<HalfspaceRow, CertificateError> {
    match constraint.kind {
        StabilityKind::Tls => zoh_tls_row(&constraint.chain, x, dt),
        StabilityKind::Clf { c3 } => clf_row(&constraint.chain, x, c3),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultReason {
    Infeasible,
    Certificate { message: String },
    Solver { message: String },
}

/// Extra context attached when an event-triggered solve fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFaultContext {
    pub state_box: StateBox,
    pub robust_rows: Vec<RobustRow>,
}

/// Why the closed loop stopped.
#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[error("controller fault at t = {time}: {reason:?}")]
pub struct ControllerFault {
    pub time: f64,
    pub state: Vec<f64>,
    pub rows: Vec<HalfspaceRow>,
    pub reason: FaultReason,
    pub event: Option<EventFaultContext>,
}

impl ControllerFault {
    pub(crate) fn new(time: f64, x: &StateVector, rows: Vec<HalfspaceRow>, reason: FaultReason) -> Self {
        Self {
            time,
            state: x.iter().copied().collect(),
            rows,
            reason,
            event: None,
        }
    }

    pub(crate) fn from_error(time: f64, x: &StateVector, rows: Vec<HalfspaceRow>, e: ControllerError) -> Self {
        let reason = match e {
            ControllerError::Certificate(c) => FaultReason::Certificate {
                message: c.to_string(),
            },
            other => FaultReason::Solver {
                message: other.to_string(),
            },
        };
        Self::new(time, x, rows, reason)
    }
}

/// Row values recorded at each solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub rows: Vec<HalfspaceRow>,
    pub control: Vec<f64>,
    pub slack: f64,
}

/// Re-solves the QP at every control interval and holds the result.
pub struct TimeDrivenPolicy<'a> {
    spec: &'a ScenarioSpec,
    config: ControllerConfig,
    records: Vec<StepRecord>,
}

impl<'a> TimeDrivenPolicy<'a> {
    pub fn new(spec: &'a ScenarioSpec, config: ControllerConfig) -> Result<Self, ControllerError> {
        config.validate()?;
        if config.method == MethodSelector::EventTlc {
            return Err(ControllerError::InvalidConfig(
                "event-triggered TLC needs EventTriggeredPolicy".into(),
            ));
        }
        Ok(Self {
            spec,
            config,
            records: Vec::new(),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn rows_at(&self, x: &StateVector) -> Result<Vec<HalfspaceRow>, CertificateError> {
        let mut rows = Vec::new();
        for chain in &self.spec.safety {
            rows.push(safety_row(chain, x, &self.config.method, self.config.dt)?);
        }
        for s in &self.spec.stability {
            rows.push(stability_row(s, x, self.config.dt)?);
        }
        Ok(rows)
    }
}

impl ControlPolicy for TimeDrivenPolicy<'_> {
    type Fault = ControllerFault;

    fn decide(&mut self, t: f64, x: &StateVector) -> Result<StepDecision, ControllerFault> {
        let rows = self
            .rows_at(x)
            .map_err(|e| ControllerFault::from_error(t, x, Vec::new(), e.into()))?;
        let bx = self.spec.system.control_box();
        let sol = solve_step(&rows, bx, self.config.w)
            .map_err(|e| ControllerFault::from_error(t, x, rows.clone(), e))?
            .ok_or_else(|| ControllerFault::new(t, x, rows.clone(), FaultReason::Infeasible))?;
        self.records.push(StepRecord {
            time: t,
            rows,
            control: sol.control.iter().copied().collect(),
            slack: sol.slack,
        });
        Ok(StepDecision {
            control: sol.control,
            slack: sol.slack,
            qp_solves: 1,
            event: false,
        })
    }

    fn constraint_names(&self) -> Vec<String> {
        self.spec.safety_names()
    }

    fn constraint_values(&self, x: &StateVector) -> Vec<f64> {
        self.spec
            .safety
            .iter()
            .map(|c| c.value(x).unwrap_or(f64::NAN))
            .collect()
    }
}
