//! Benchmark problems: adaptive cruise control and a unicycle robot avoiding a disc.

mod acc;
mod robot;

pub use acc::{make_acc, AccParams};
pub use robot::{make_robot, RobotParams, StabilityMode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{CertificateError, ClassKSpec, LieDerivativeChain};
use crate::controller::{ControllerConfig, MethodSelector};
use crate::dynamics::{ControlAffineSystem, DynamicsError, StateVector};
use crate::event_trigger::EventTriggerConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsafe initial state: {0}")]
    InitialStateUnsafe(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Acc,
    Robot,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Acc => "acc",
            ScenarioKind::Robot => "robot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilityKind {
    /// ZOH-TLS row at the controller step.
    Tls,
    /// CLF row with decay rate `c3`.
    Clf { c3: f64 },
}

#[derive(Debug, Clone)]
pub struct StabilityConstraint {
    pub chain: LieDerivativeChain,
    pub kind: StabilityKind,
}

/// What the final tracking error is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrackingTarget {
    State { index: usize, target: f64 },
    Position { x_index: usize, y_index: usize, x: f64, y: f64 },
}

impl TrackingTarget {
    pub fn error(&self, x: &StateVector) -> f64 {
        match *self {
            TrackingTarget::State { index, target } => (x[index] - target).abs(),
            TrackingTarget::Position {
                x_index,
                y_index,
                x: xd,
                y: yd,
            } => (x[x_index] - xd).hypot(x[y_index] - yd),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioParams {
    Acc(AccParams),
    Robot(RobotParams),
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub system: ControlAffineSystem,
    /// Hard constraints `h ≥ 0`.
    pub safety: Vec<LieDerivativeChain>,
    pub stability: Vec<StabilityConstraint>,
    pub x0: StateVector,
    pub tracking: TrackingTarget,
    pub t_end: f64,
    pub params: ScenarioParams,
}

impl ScenarioSpec {
    pub fn safety_names(&self) -> Vec<String> {
        self.safety.iter().map(|c| c.name().to_string()).collect()
    }

    /// Per-state sampling ranges covering normal operation.
    pub fn envelope(&self) -> Vec<(f64, f64)> {
        match &self.params {
            ScenarioParams::Acc(p) => vec![(1.0, 1.25 * p.v_d.max(p.v_init)), (p.c, 12.0 * p.c)],
            ScenarioParams::Robot(p) => vec![
                (p.x_init[0].min(p.x_d) - 5.0, p.x_init[0].max(p.x_d) + 5.0),
                (p.y_low() - 10.0, p.y_high() + 10.0),
                (-std::f64::consts::PI, std::f64::consts::PI),
                (p.v_min + 0.05, p.v_max),
            ],
        }
    }

    /// All chains, safety first.
    pub fn chains(&self) -> impl Iterator<Item = &LieDerivativeChain> {
        self.safety
            .iter()
            .chain(self.stability.iter().map(|s| &s.chain))
    }
}

/// Defaults for one scenario, with the keys that have no published value.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultConfigs {
    pub controller: ControllerConfig,
    pub event: EventTriggerConfig,
    pub hocbf_gains: ClassKSpec,
    pub invented: Vec<&'static str>,
}

pub const DEFAULT_SUBSTEPS: usize = 10;

pub fn default_configs(spec: &ScenarioSpec) -> DefaultConfigs {
    let n = spec.system.state_dim();
    let grid_per_dim = if n <= 2 { 7 } else { 5 };
    match &spec.params {
        ScenarioParams::Acc(p) => DefaultConfigs {
            controller: ControllerConfig {
                dt: p.dt,
                w: 1e6,
                substeps: DEFAULT_SUBSTEPS,
                method: MethodSelector::ZohTlc,
            },
            event: EventTriggerConfig {
                monitor_dt: p.d_t,
                lower_offsets: p.offsets.to_vec(),
                upper_offsets: p.offsets.to_vec(),
                grid_per_dim,
                row_dt: None,
            },
            hocbf_gains: ClassKSpec::new(vec![1.0, 1.0]).expect("positive gains"),
            invented: vec!["controller.w", "acc.t_end"],
        },
        ScenarioParams::Robot(p) => DefaultConfigs {
            controller: ControllerConfig {
                dt: p.dt,
                w: 1.0,
                substeps: DEFAULT_SUBSTEPS,
                method: MethodSelector::ZohTlc,
            },
            event: EventTriggerConfig {
                monitor_dt: p.d_t,
                lower_offsets: p.offsets.to_vec(),
                upper_offsets: p.offsets.to_vec(),
                grid_per_dim,
                row_dt: None,
            },
            hocbf_gains: ClassKSpec::new(vec![1.0, 1.0]).expect("positive gains"),
            invented: vec![
                "controller.w",
                "robot.dt",
                "robot.d_t",
                "robot.t_end",
                "robot.x_init",
                "robot.x_o",
                "robot.y_o",
                "robot.x_d",
                "robot.y_d",
                "robot.vd_gain",
                "robot.c3",
                "robot.stability",
            ],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acc_defaults() {
        let d = default_configs(&make_acc(AccParams::default()).unwrap());
        assert_eq!(d.controller.dt, 0.1);
        assert_eq!(d.event.monitor_dt, 0.03);
        assert_eq!(d.controller.substeps, 10);
        assert_eq!(d.event.grid_per_dim, 7);
        assert!(d.invented.contains(&"controller.w"));
    }

    #[test]
    fn robot_defaults() {
        let d = default_configs(&make_robot(RobotParams::default()).unwrap());
        assert_eq!(d.controller.dt, 0.1);
        assert_eq!(d.event.lower_offsets, vec![0.2, 0.2, 0.1, 0.1]);
        assert_eq!(d.event.grid_per_dim, 5);
        assert_eq!(d.controller.w, 1.0);
    }

    #[test]
    fn tracking_errors() {
        let t = TrackingTarget::Position {
            x_index: 0,
            y_index: 1,
            x: 3.0,
            y: 4.0,
        };
        assert_eq!(t.error(&StateVector::zeros(4)), 5.0);
        let t = TrackingTarget::State {
            index: 0,
            target: 13.89,
        };
        assert!((t.error(&StateVector::from_vec(vec![14.0, 0.0])) - 0.11).abs() < 1e-12);
    }
}
