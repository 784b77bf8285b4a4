//! Control-affine systems `ẋ = f(x) + g(x)u` and their zero-order-hold closed loop.
//!
//! States and controls are flat `DVector<f64>`s; the physical unit of each entry
//! is documented by the scenario that builds the system (see `state_names`).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type StateVector = DVector<f64>;
pub type ControlVector = DVector<f64>;

/// Drift vector field `f : ℝⁿ → ℝⁿ`.
pub type DriftFn = Arc<dyn Fn(&StateVector) -> StateVector + Send + Sync>;
/// Input map `g : ℝⁿ → ℝ^{n×q}`.
pub type InputMapFn = Arc<dyn Fn(&StateVector) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite dynamics at state {state:?}")]
    NonFinite { state: Vec<f64> },
    #[error("integration produced a non-finite state; last valid time {last_valid_time}")]
    Integration { last_valid_time: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Component-wise bounds `u_min ≤ u ≤ u_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBox {
    lower: ControlVector,
    upper: ControlVector,
}

impl ControlBox {
    pub fn new(lower: ControlVector, upper: ControlVector) -> Result<Self, DynamicsError> {
        if lower.len() != upper.len() {
            return Err(DynamicsError::Dimension {
                what: "control box upper bound",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(DynamicsError::InvalidArgument(
                "control box requires u_min <= u_max component-wise".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-bound, bound]` per component.
    pub fn symmetric(bounds: &[f64]) -> Result<Self, DynamicsError> {
        let upper = DVector::from_column_slice(bounds);
        Self::new(-upper.clone(), upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &ControlVector {
        &self.lower
    }

    pub fn upper(&self) -> &ControlVector {
        &self.upper
    }

    pub fn contains(&self, u: &ControlVector) -> bool {
        u.len() == self.dim()
            && u
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn clamp(&self, u: &ControlVector) -> ControlVector {
        ControlVector::from_iterator(
            u.len(),
            u.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(v, (l, h))| v.clamp(*l, *h)),
        )
    }
}

#[derive(Clone)]
pub struct ControlAffineSystem {
    n: usize,
    q: usize,
    drift: DriftFn,
    input_map: InputMapFn,
    control_box: ControlBox,
    state_names: Vec<String>,
    control_names: Vec<String>,
}

impl fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("n", &self.n)
            .field("q", &self.q)
            .field("control_box", &self.control_box)
            .field("state_names", &self.state_names)
            .field("control_names", &self.control_names)
            .finish_non_exhaustive()
    }
}

impl ControlAffineSystem {
    pub fn new(
        n: usize,
        q: usize,
        drift: DriftFn,
        input_map: InputMapFn,
        control_box: ControlBox,
    ) -> Result<Self, DynamicsError> {
        if control_box.dim() != q {
            return Err(DynamicsError::Dimension {
                what: "control box",
                expected: q,
                got: control_box.dim(),
            });
        }
        Ok(Self {
            n,
            q,
            drift,
            input_map,
            control_box,
            state_names: (0..n).map(|i| format!("x{i}")).collect(),
            control_names: (0..q).map(|i| format!("u{i}")).collect(),
        })
    }

    /// Attach column names used in logs and CSV output.
    pub fn with_names(mut self, states: &[&str], controls: &[&str]) -> Self {
        assert_eq!(states.len(), self.n, "state name count");
        assert_eq!(controls.len(), self.q, "control name count");
        self.state_names = states.iter().map(|s| s.to_string()).collect();
        self.control_names = controls.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.q
    }

    pub fn control_box(&self) -> &ControlBox {
        &self.control_box
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn control_names(&self) -> &[String] {
        &self.control_names
    }

    pub fn drift(&self, x: &StateVector) -> StateVector {
        (self.drift)(x)
    }

    pub fn input_map(&self, x: &StateVector) -> DMatrix<f64> {
        (self.input_map)(x)
    }

    /// `f(x) + g(x)·u`.
    pub fn eval_dynamics(
        &self,
        x: &StateVector,
        u: &ControlVector,
    ) -> Result<StateVector, DynamicsError> {
        if x.len() != self.n {
            return Err(DynamicsError::Dimension {
                what: "state",
                expected: self.n,
                got: x.len(),
            });
        }
        if u.len() != self.q {
            return Err(DynamicsError::Dimension {
                what: "control",
                expected: self.q,
                got: u.len(),
            });
        }
        let g = self.input_map(x);
        debug_assert_eq!(g.shape(), (self.n, self.q));
        let dx = self.drift(x) + g * u;
        if dx.iter().all(|v| v.is_finite()) {
            Ok(dx)
        } else {
            Err(DynamicsError::NonFinite {
                state: x.iter().copied().collect(),
            })
        }
    }

    fn rk4_step(
        &self,
        x: &StateVector,
        u: &ControlVector,
        h: f64,
    ) -> Result<StateVector, DynamicsError> {
        let k1 = self.eval_dynamics(x, u)?;
        let k2 = self.eval_dynamics(&(x + &k1 * (h / 2.0)), u)?;
        let k3 = self.eval_dynamics(&(x + &k2 * (h / 2.0)), u)?;
        let k4 = self.eval_dynamics(&(x + &k3 * h), u)?;
        let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(DynamicsError::NonFinite {
                state: x.iter().copied().collect(),
            })
        }
    }

    /// Classical RK4 over `dt` with `substeps` equal steps, `u` held constant.
    pub fn integrate_zoh_step(
        &self,
        x0: &StateVector,
        u: &ControlVector,
        dt: f64,
        substeps: usize,
    ) -> Result<StateVector, DynamicsError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DynamicsError::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if substeps == 0 {
            return Err(DynamicsError::InvalidArgument(
                "substeps must be >= 1".into(),
            ));
        }
        let h = dt / substeps as f64;
        let mut x = x0.clone();
        for i in 0..substeps {
            x = self.rk4_step(&x, u, h).map_err(|_| DynamicsError::Integration {
                last_valid_time: i as f64 * h,
            })?;
        }
        Ok(x)
    }
}

/// What a policy hands back for one closed-loop step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    pub control: ControlVector,
    pub slack: f64,
    /// QPs solved to produce this decision (0 when a held control is reused).
    pub qp_solves: usize,
    /// Whether this step starts a new event (re-solve).
    pub event: bool,
}

/// A per-step control law `(t, x) ↦ u`.
pub trait ControlPolicy {
    type Fault: std::error::Error + Clone + 'static;

    fn decide(&mut self, t: f64, x: &StateVector) -> Result<StepDecision, Self::Fault>;

    /// Names of the safety functions reported in the log.
    fn constraint_names(&self) -> Vec<String> {
        Vec::new()
    }

    /// Values of the safety functions at `x`, same order as `constraint_names`.
    fn constraint_values(&self, _x: &StateVector) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub state_names: Vec<String>,
    pub control_names: Vec<String>,
    pub constraint_names: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub controls: Vec<ControlVector>,
    pub slack: Vec<f64>,
    /// `h_values[j][k]` is constraint `j` at sample `k`.
    pub h_values: Vec<Vec<f64>>,
    pub event_times: Vec<f64>,
    pub qp_count: usize,
    /// Constraint values at every integrator substep, for inter-sample minima.
    pub dense: DenseTrace,
}

/// Constraint values on the integrator's substep grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseTrace {
    pub times: Vec<f64>,
    pub h_values: Vec<Vec<f64>>,
}

impl DenseTrace {
    fn push(&mut self, t: f64, h: &[f64]) {
        self.times.push(t);
        for (col, v) in self.h_values.iter_mut().zip(h) {
            col.push(*v);
        }
    }

    /// Per-constraint minimum over the trace.
    pub fn min_h(&self) -> Vec<f64> {
        self.h_values
            .iter()
            .map(|col| col.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

impl SimulationLog {
    fn new(
        state_names: Vec<String>,
        control_names: Vec<String>,
        constraint_names: Vec<String>,
    ) -> Self {
        let h_values = vec![Vec::new(); constraint_names.len()];
        let dense = DenseTrace {
            times: Vec::new(),
            h_values: h_values.clone(),
        };
        Self {
            dense,
            state_names,
            control_names,
            constraint_names,
            times: Vec::new(),
            states: Vec::new(),
            controls: Vec::new(),
            slack: Vec::new(),
            h_values,
            event_times: Vec::new(),
            qp_count: 0,
        }
    }

    fn push(&mut self, t: f64, x: StateVector, u: ControlVector, slack: f64, h: Vec<f64>) {
        self.times.push(t);
        self.states.push(x);
        self.controls.push(u);
        self.slack.push(slack);
        for (col, v) in self.h_values.iter_mut().zip(h) {
            col.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the named state component.
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    /// Time series of one state component.
    pub fn state_series(&self, idx: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[idx]).collect()
    }

    /// Minimum of every logged constraint over the samples.
    pub fn min_h(&self) -> Vec<f64> {
        self.h_values
            .iter()
            .map(|col| col.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Why a closed-loop run stopped early.
#[derive(Debug, Error, Clone)]
pub enum LoopError<F: std::error::Error + Clone + 'static> {
    #[error("invalid closed-loop arguments: {0}")]
    InvalidArgument(String),
    #[error("controller fault at t = {time}: {fault}")]
    Controller { time: f64, fault: F },
    #[error("dynamics failure at t = {time}: {source}")]
    Dynamics {
        time: f64,
        #[source]
        source: DynamicsError,
    },
    #[error("policy returned control {control:?} outside the control box at t = {time}")]
    ControlOutOfBox { time: f64, control: Vec<f64> },
}

/// A run that stopped early keeps whatever it logged up to the failure.
#[derive(Debug, Clone)]
pub struct LoopFailure<F: std::error::Error + Clone + 'static> {
    pub error: LoopError<F>,
    pub partial: SimulationLog,
}

impl<F: std::error::Error + Clone + 'static> fmt::Display for LoopFailure<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} samples)", self.error, self.partial.len())
    }
}

impl<F: std::error::Error + Clone + 'static> std::error::Error for LoopFailure<F> {}

/// Sample instants `0, dt, 2dt, …` up to and including `t_end`; the last step
/// is shortened when `t_end` is not a multiple of `dt`.
pub fn sample_times(t_end: f64, dt: f64) -> Vec<f64> {
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| (k as f64 * dt).min(t_end)).collect();
    times[steps] = t_end;
    times
}

/// Runs `policy` in closed loop on `sys` from `x0` over `[0, t_end]`.
///
/// The policy is queried at every sample except the last; its control is held
/// (ZOH) and integrated with `substeps` RK4 steps. The final sample logs the
/// control that was applied over the last step.
pub fn run_closed_loop<P: ControlPolicy>(
    sys: &ControlAffineSystem,
    policy: &mut P,
    x0: &StateVector,
    t_end: f64,
    dt: f64,
    substeps: usize,
) -> Result<SimulationLog, LoopFailure<P::Fault>> {
    let mut log = SimulationLog::new(
        sys.state_names().to_vec(),
        sys.control_names().to_vec(),
        policy.constraint_names(),
    );
    let fail = |error, partial| Err(LoopFailure { error, partial });
    if !(t_end > 0.0) || !t_end.is_finite() {
        return fail(
            LoopError::InvalidArgument(format!("t_end must be positive, got {t_end}")),
            log,
        );
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return fail(
            LoopError::InvalidArgument(format!("dt must be positive, got {dt}")),
            log,
        );
    }
    if substeps == 0 {
        return fail(
            LoopError::InvalidArgument("substeps must be >= 1".into()),
            log,
        );
    }
    if x0.len() != sys.state_dim() {
        return fail(
            LoopError::InvalidArgument(format!(
                "initial state has length {}, system expects {}",
                x0.len(),
                sys.state_dim()
            )),
            log,
        );
    }

    let times = sample_times(t_end, dt);
    let mut x = x0.clone();
    let mut last: Option<StepDecision> = None;
    for (k, &t) in times.iter().enumerate() {
        if k + 1 == times.len() {
            let held = last.clone().expect("at least one step");
            let h = policy.constraint_values(&x);
            log.push(t, x.clone(), held.control, held.slack, h);
            break;
        }
        let decision = match policy.decide(t, &x) {
            Ok(d) => d,
            Err(fault) => return fail(LoopError::Controller { time: t, fault }, log),
        };
        if !sys.control_box().contains(&decision.control) {
            return fail(
                LoopError::ControlOutOfBox {
                    time: t,
                    control: decision.control.iter().copied().collect(),
                },
                log,
            );
        }
        log.qp_count += decision.qp_solves;
        if decision.event {
            log.event_times.push(t);
        }
        let h = policy.constraint_values(&x);
        if k == 0 {
            log.dense.push(t, &h);
        }
        log.push(t, x.clone(), decision.control.clone(), decision.slack, h);
        let h_sub = (times[k + 1] - t) / substeps as f64;
        for i in 0..substeps {
            x = match sys.rk4_step(&x, &decision.control, h_sub) {
                Ok(next) => next,
                Err(_) => {
                    let e = DynamicsError::Integration {
                        last_valid_time: t + i as f64 * h_sub,
                    };
                    return fail(LoopError::Dynamics { time: t, source: e }, log);
                }
            };
            let ts = if i + 1 == substeps {
                times[k + 1]
            } else {
                t + (i + 1) as f64 * h_sub
            };
            let hv = policy.constraint_values(&x);
            log.dense.push(ts, &hv);
        }
        last = Some(decision);
    }
    Ok(log)
}
