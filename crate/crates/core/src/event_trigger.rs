//! Event-triggered TLC: robust rows over a state box, re-solved only when the
//! monitored state leaves the box.

use serde::{Deserialize, Serialize};

use crate::certificates::{
    normalized_taylor_sum, CertificateError, HalfspaceRow, LieDerivativeChain,
};
use crate::controller::{
    safety_row, solve_step, stability_row, ControllerConfig, ControllerError, ControllerFault,
    EventFaultContext, FaultReason, MethodSelector, StepRecord,
};
use crate::dynamics::{ControlPolicy, ControlVector, StateVector, StepDecision};
use crate::scenarios::ScenarioSpec;

/// `[center - lower_offsets, center + upper_offsets]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub center: Vec<f64>,
    pub lower_offsets: Vec<f64>,
    pub upper_offsets: Vec<f64>,
}

impl StateBox {
    pub fn new(
        center: &StateVector,
        lower_offsets: &[f64],
        upper_offsets: &[f64],
    ) -> Result<Self, CertificateError> {
        let n = center.len();
        if lower_offsets.len() != n || upper_offsets.len() != n {
            return Err(CertificateError::InvalidArgument(format!(
                "box offsets have lengths {}/{}, state has {n}",
                lower_offsets.len(),
                upper_offsets.len()
            )));
        }
        if lower_offsets
            .iter()
            .chain(upper_offsets)
            .any(|o| !(*o >= 0.0) || !o.is_finite())
        {
            return Err(CertificateError::InvalidArgument(
                "box offsets must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            center: center.iter().copied().collect(),
            lower_offsets: lower_offsets.to_vec(),
            upper_offsets: upper_offsets.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.center[i] - self.lower_offsets[i]
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.center[i] + self.upper_offsets[i]
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &StateVector) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| self.lower(i) <= x[i] && x[i] <= self.upper(i))
    }

    /// Uniform grid with `per_dim` points along every non-degenerate axis
    /// (end points included, so every corner is a node).
    pub fn grid(&self, per_dim: usize) -> Vec<StateVector> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| {
                let (lo, hi) = (self.lower(i), self.upper(i));
                if lo == hi || per_dim < 2 {
                    vec![self.center[i]]
                } else {
                    (0..per_dim)
                        .map(|k| {
                            if k + 1 == per_dim {
                                hi
                            } else {
                                lo + (hi - lo) * k as f64 / (per_dim - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let mut out = vec![StateVector::zeros(self.dim())];
        for (i, axis) in axes.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for p in &out {
                for &v in axis {
                    let mut q = p.clone();
                    q[i] = v;
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    fn clamp(&self, x: &mut StateVector) {
        for i in 0..self.dim() {
            x[i] = x[i].clamp(self.lower(i), self.upper(i));
        }
    }
}

/// Exit test: true iff some component lies strictly outside the closed box.
pub fn detect_exit(x: &StateVector, state_box: &StateBox) -> bool {
    !state_box.contains(x)
}

/// Conservative safety row over a box: `G·u + h_r ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustRow {
    pub g: Vec<f64>,
    pub h_r: f64,
}

impl RobustRow {
    pub fn to_row(&self) -> HalfspaceRow {
        HalfspaceRow::geq(self.g.clone(), self.h_r)
    }
}

const ZOOM_ITERATIONS: usize = 40;

/// Minimizes `score` over the box, starting from the best grid node and
/// shrinking a 3-points-per-axis pattern around the incumbent.
fn refine_min(
    state_box: &StateBox,
    start: StateVector,
    start_value: f64,
    spacing: &[f64],
    score: &dyn Fn(&StateVector) -> Result<f64, CertificateError>,
) -> Result<f64, CertificateError> {
    let n = state_box.dim();
    let mut best = start;
    let mut best_value = start_value;
    let mut window: Vec<f64> = spacing.to_vec();
    for _ in 0..ZOOM_ITERATIONS {
        let center = best.clone();
        let mut offsets = vec![vec![0.0; n]];
        for i in 0..n {
            if window[i] == 0.0 {
                continue;
            }
            let mut next = Vec::with_capacity(offsets.len() * 3);
            for o in &offsets {
                for s in [-1.0, 0.0, 1.0] {
                    let mut p = o.clone();
                    p[i] = s * window[i];
                    next.push(p);
                }
            }
            offsets = next;
        }
        for o in &offsets {
            let mut y = center.clone();
            for i in 0..n {
                y[i] += o[i];
            }
            state_box.clamp(&mut y);
            let v = score(&y)?;
            if v < best_value {
                best_value = v;
                best = y;
            }
        }
        window.iter_mut().for_each(|w| *w *= 0.5);
    }
    Ok(best_value)
}

/// Robust ZOH-TLC row for `chain` over `state_box`.
///
/// `h_r` is the minimum of the normalized Taylor sum and `G_k` the minimum
/// (`u_sign[k] ≥ 0`) or maximum (`u_sign[k] < 0`) of `L_g L_f^{m-1} h`, each
/// taken over the grid and then refined locally.
pub fn robust_bounds(
    chain: &LieDerivativeChain,
    state_box: &StateBox,
    dt: f64,
    u_sign: &[f64],
    grid_per_dim: usize,
) -> Result<RobustRow, CertificateError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CertificateError::InvalidStep(dt));
    }
    if grid_per_dim < 2 {
        return Err(CertificateError::InvalidArgument(format!(
            "grid_per_dim must be >= 2, got {grid_per_dim}"
        )));
    }
    let q = chain.control_dim();
    if u_sign.len() != q {
        return Err(CertificateError::InvalidArgument(format!(
            "u_sign has length {}, chain has {q} inputs",
            u_sign.len()
        )));
    }
    let nodes = state_box.grid(grid_per_dim);
    let values = nodes
        .iter()
        .map(|y| chain.evaluate(y))
        .collect::<Result<Vec<_>, _>>()?;
    let spacing: Vec<f64> = (0..state_box.dim())
        .map(|i| (state_box.upper(i) - state_box.lower(i)) / (grid_per_dim - 1) as f64)
        .collect();

    let b_of = |y: &StateVector| -> Result<f64, CertificateError> {
        Ok(normalized_taylor_sum(&chain.evaluate(y)?.lf, dt))
    };
    let (i_min, b_min) = argmin(values.iter().map(|v| normalized_taylor_sum(&v.lf, dt)));
    let h_r = refine_min(state_box, nodes[i_min].clone(), b_min, &spacing, &b_of)?;

    let mut g = Vec::with_capacity(q);
    for (k, s) in u_sign.iter().enumerate() {
        // minimize sign·lglf_k, then undo the sign
        let sign = if *s >= 0.0 { 1.0 } else { -1.0 };
        let score = move |y: &StateVector| -> Result<f64, CertificateError> {
            Ok(sign * chain.evaluate(y)?.lglf[k])
        };
        let (i_best, best) = argmin(values.iter().map(|v| sign * v.lglf[k]));
        let refined = refine_min(state_box, nodes[i_best].clone(), best, &spacing, &score)?;
        g.push(sign * refined);
    }
    Ok(RobustRow { g, h_r })
}

fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTriggerConfig {
    /// Period at which the state is checked against the box.
    pub monitor_dt: f64,
    pub lower_offsets: Vec<f64>,
    pub upper_offsets: Vec<f64>,
    pub grid_per_dim: usize,
    /// Step used inside the robust TLC row; `None` means the controller `dt`.
    pub row_dt: Option<f64>,
}

/// Solve once per event, hold the control until the state leaves the box.
pub struct EventTriggeredPolicy<'a> {
    spec: &'a ScenarioSpec,
    config: ControllerConfig,
    event: EventTriggerConfig,
    current: Option<(StateBox, ControlVector, f64)>,
    records: Vec<StepRecord>,
    boxes: Vec<(f64, StateBox)>,
}

impl<'a> EventTriggeredPolicy<'a> {
    pub fn new(
        spec: &'a ScenarioSpec,
        config: ControllerConfig,
        event: EventTriggerConfig,
    ) -> Result<Self, ControllerError> {
        config.validate()?;
        let n = spec.system.state_dim();
        if !(event.monitor_dt > 0.0) || event.monitor_dt > config.dt {
            return Err(ControllerError::InvalidConfig(format!(
                "monitor_dt must lie in (0, dt = {}], got {}",
                config.dt, event.monitor_dt
            )));
        }
        if event.lower_offsets.len() != n || event.upper_offsets.len() != n {
            return Err(ControllerError::InvalidConfig(format!(
                "box offsets need {n} entries"
            )));
        }
        if event.grid_per_dim < 2 {
            return Err(ControllerError::InvalidConfig("grid_per_dim must be >= 2".into()));
        }
        if let Some(r) = event.row_dt {
            if !(r > 0.0) || !r.is_finite() {
                return Err(ControllerError::InvalidConfig(format!(
                    "row_dt must be positive, got {r}"
                )));
            }
        }
        Ok(Self {
            spec,
            config,
            event,
            current: None,
            records: Vec::new(),
            boxes: Vec::new(),
        })
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// `(event time, box)` for every event so far.
    pub fn boxes(&self) -> &[(f64, StateBox)] {
        &self.boxes
    }

    fn row_dt(&self) -> f64 {
        self.event.row_dt.unwrap_or(self.config.dt)
    }

    fn trigger(&mut self, t: f64, x: &StateVector) -> Result<StepDecision, ControllerFault> {
        let dt = self.row_dt();
        let bx = self.spec.system.control_box();
        let cert = |e: CertificateError, rows: Vec<HalfspaceRow>| {
            ControllerFault::from_error(t, x, rows, e.into())
        };

        let mut stability = Vec::new();
        for s in &self.spec.stability {
            stability.push(stability_row(s, x, dt).map_err(|e| cert(e, Vec::new()))?);
        }
        let mut nominal = Vec::new();
        for chain in &self.spec.safety {
            nominal.push(safety_row(chain, x, &MethodSelector::EventTlc, dt).map_err(|e| cert(e, Vec::new()))?);
        }
        nominal.extend(stability.iter().cloned());
        let nominal_sol = solve_step(&nominal, bx, self.config.w)
            .map_err(|e| ControllerFault::from_error(t, x, nominal.clone(), e))?
            .ok_or_else(|| ControllerFault::new(t, x, nominal.clone(), FaultReason::Infeasible))?;
        let u_sign: Vec<f64> = nominal_sol
            .control
            .iter()
            .map(|u| if *u >= 0.0 { 1.0 } else { -1.0 })
            .collect();

        let state_box = StateBox::new(x, &self.event.lower_offsets, &self.event.upper_offsets)
            .map_err(|e| cert(e, Vec::new()))?;
        let mut robust = Vec::new();
        for chain in &self.spec.safety {
            robust.push(
                robust_bounds(chain, &state_box, dt, &u_sign, self.event.grid_per_dim)
                    .map_err(|e| cert(e, Vec::new()))?,
            );
        }
        let mut rows: Vec<HalfspaceRow> = robust.iter().map(RobustRow::to_row).collect();
        rows.extend(stability);
        let context = EventFaultContext {
            state_box: state_box.clone(),
            robust_rows: robust.clone(),
        };
        let with_context = |mut f: ControllerFault| {
            f.event = Some(context.clone());
            f
        };
        let sol = solve_step(&rows, bx, self.config.w)
            .map_err(|e| with_context(ControllerFault::from_error(t, x, rows.clone(), e)))?
            .ok_or_else(|| with_context(ControllerFault::new(t, x, rows.clone(), FaultReason::Infeasible)))?;

        self.records.push(StepRecord {
            time: t,
            rows,
            control: sol.control.iter().copied().collect(),
            slack: sol.slack,
        });
        self.boxes.push((t, state_box.clone()));
        self.current = Some((state_box, sol.control.clone(), sol.slack));
        Ok(StepDecision {
            control: sol.control,
            slack: sol.slack,
            qp_solves: 2,
            event: true,
        })
    }
}

impl ControlPolicy for EventTriggeredPolicy<'_> {
    type Fault = ControllerFault;

    fn decide(&mut self, t: f64, x: &StateVector) -> Result<StepDecision, ControllerFault> {
        match &self.current {
            Some((b, u, slack)) if !detect_exit(x, b) => Ok(StepDecision {
                control: u.clone(),
                slack: *slack,
                qp_solves: 0,
                event: false,
            }),
            _ => self.trigger(t, x),
        }
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
