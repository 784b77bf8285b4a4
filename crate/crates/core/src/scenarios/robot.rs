use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificates::{ChainValues, LieDerivativeChain};
use crate::dynamics::{ControlAffineSystem, ControlBox};

use super::{
    ScenarioError, ScenarioKind, ScenarioParams, ScenarioSpec, StabilityConstraint,
    StabilityKind, TrackingTarget,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMode {
    /// `V = |p - p_d|²` with relative degree two, as a ZOH-TLS row.
    TlsM2,
    /// Speed and heading CLFs, both relative degree one.
    ClfPair,
}

/// Unicycle `(x, y, θ, v)` with turn rate `u1` and acceleration `u2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    pub x_o: f64,
    pub y_o: f64,
    pub r: f64,
    /// Physical obstacle radius, used only for plots.
    pub r_body: f64,
    pub x_d: f64,
    pub y_d: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u1_max: f64,
    pub u2_max: f64,
    pub x_init: [f64; 4],
    pub dt: f64,
    pub d_t: f64,
    pub offsets: [f64; 4],
    pub t_end: f64,
    pub c3: f64,
    pub vd_gain: f64,
    pub stability: StabilityMode,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            x_o: 25.0,
            y_o: 12.5,
            r: 7.0,
            r_body: 6.0,
            x_d: 50.0,
            y_d: 15.0,
            v_min: 0.0,
            v_max: 2.0,
            u1_max: 0.4,
            u2_max: 0.8,
            x_init: [0.0, 10.0, 0.0, 0.5],
            dt: 0.1,
            d_t: 0.03,
            offsets: [0.2, 0.2, 0.1, 0.1],
            t_end: 60.0,
            c3: 1.0,
            vd_gain: 0.1,
            stability: StabilityMode::ClfPair,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("r", self.r),
            ("v_max", self.v_max),
            ("u1_max", self.u1_max),
            ("u2_max", self.u2_max),
            ("dt", self.dt),
            ("d_t", self.d_t),
            ("t_end", self.t_end),
            ("c3", self.c3),
            ("vd_gain", self.vd_gain),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ScenarioError::InvalidParameter(format!(
                    "robot.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.v_min >= 0.0) || self.v_min >= self.v_max {
            return Err(ScenarioError::InvalidParameter(format!(
                "robot speed limits must satisfy 0 <= v_min < v_max, got [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        if self.offsets.iter().any(|o| !(*o >= 0.0) || !o.is_finite()) {
            return Err(ScenarioError::InvalidParameter(format!(
                "robot.offsets must be nonnegative, got {:?}",
                self.offsets
            )));
        }
        let [x, y, _, _] = self.x_init;
        let d2 = (x - self.x_o).powi(2) + (y - self.y_o).powi(2);
        if d2 < self.r * self.r {
            return Err(ScenarioError::InitialStateUnsafe(format!(
                "start ({x}, {y}) lies inside the clearance disc of radius {}",
                self.r
            )));
        }
        Ok(())
    }

    pub(crate) fn y_low(&self) -> f64 {
        self.x_init[1].min(self.y_d).min(self.y_o)
    }

    pub(crate) fn y_high(&self) -> f64 {
        self.x_init[1].max(self.y_d).max(self.y_o)
    }

    /// `min(v_max, vd_gain·|p - p_d|)`.
    pub fn desired_speed(&self, x: f64, y: f64) -> f64 {
        (self.vd_gain * (x - self.x_d).hypot(y - self.y_d)).min(self.v_max)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// `(x-x_c)² + (y-y_c)² - r²` along the unicycle, relative degree two.
fn disc_chain(name: &str, xc: f64, yc: f64, r: f64, sign: f64) -> Result<LieDerivativeChain, ScenarioError> {
    Ok(LieDerivativeChain::new(
        name,
        2,
        2,
        Arc::new(move |s| {
            let (dx, dy, th, v) = (s[0] - xc, s[1] - yc, s[2], s[3]);
            let (sn, cs) = th.sin_cos();
            ChainValues {
                lf: vec![
                    sign * (dx * dx + dy * dy - r * r),
                    sign * 2.0 * v * (dx * cs + dy * sn),
                    sign * 2.0 * v * v,
                ],
                lglf: vec![
                    sign * 2.0 * v * (-dx * sn + dy * cs),
                    sign * 2.0 * (dx * cs + dy * sn),
                ],
            }
        }),
    )?)
}

pub fn make_robot(params: RobotParams) -> Result<ScenarioSpec, ScenarioError> {
    params.validate()?;
    let p = Arc::new(params.clone());

    let drift = Arc::new(|s: &DVector<f64>| {
        DVector::from_vec(vec![s[3] * s[2].cos(), s[3] * s[2].sin(), 0.0, 0.0])
    });
    let input_map = Arc::new(|_: &DVector<f64>| {
        let mut g = DMatrix::zeros(4, 2);
        g[(2, 0)] = 1.0;
        g[(3, 1)] = 1.0;
        g
    });
    let bx = ControlBox::symmetric(&[p.u1_max, p.u2_max])?;
    let system = ControlAffineSystem::new(4, 2, drift, input_map, bx)?
        .with_names(&["x", "y", "theta", "v"], &["u1", "u2"]);

    let obstacle = disc_chain("obstacle", p.x_o, p.y_o, p.r, 1.0)?;
    let vmax = p.v_max;
    let speed_max = LieDerivativeChain::new(
        "speed_max",
        1,
        2,
        Arc::new(move |s| ChainValues {
            lf: vec![vmax - s[3], 0.0],
            lglf: vec![0.0, -1.0],
        }),
    )?;
    let vmin = p.v_min;
    let speed_min = LieDerivativeChain::new(
        "speed_min",
        1,
        2,
        Arc::new(move |s| ChainValues {
            lf: vec![s[3] - vmin, 0.0],
            lglf: vec![0.0, 1.0],
        }),
    )?;

    let stability = match p.stability {
        StabilityMode::TlsM2 => vec![StabilityConstraint {
            chain: disc_chain("goal_distance", p.x_d, p.y_d, 0.0, 1.0)?,
            kind: StabilityKind::Tls,
        }],
        StabilityMode::ClfPair => {
            let kind = StabilityKind::Clf { c3: p.c3 };
            vec![
                StabilityConstraint {
                    chain: speed_clf(p.clone())?,
                    kind,
                },
                StabilityConstraint {
                    chain: heading_clf(p.clone())?,
                    kind,
                },
            ]
        }
    };

    Ok(ScenarioSpec {
        kind: ScenarioKind::Robot,
        system,
        safety: vec![obstacle, speed_max, speed_min],
        stability,
        x0: DVector::from_column_slice(&p.x_init),
        tracking: TrackingTarget::Position {
            x_index: 0,
            y_index: 1,
            x: p.x_d,
            y: p.y_d,
        },
        t_end: p.t_end,
        params: ScenarioParams::Robot(params),
    })
}

/// `V1 = (v - v_d(x, y))²`.
fn speed_clf(p: Arc<RobotParams>) -> Result<LieDerivativeChain, ScenarioError> {
    Ok(LieDerivativeChain::new(
        "speed_tracking",
        1,
        2,
        Arc::new(move |s| {
            let (x, y, th, v) = (s[0], s[1], s[2], s[3]);
            let (ex, ey) = (x - p.x_d, y - p.y_d);
            let dist = ex.hypot(ey);
            let vd = p.desired_speed(x, y);
            let vd_rate = if p.vd_gain * dist < p.v_max && dist > 0.0 {
                p.vd_gain * v * (ex * th.cos() + ey * th.sin()) / dist
            } else {
                0.0
            };
            let e = v - vd;
            ChainValues {
                lf: vec![e * e, -2.0 * e * vd_rate],
                lglf: vec![0.0, 2.0 * e],
            }
        }),
    )?)
}

/// `V2 = (θ - β)²` with `β` the bearing to the destination, wrapped to `(-π, π]`.
fn heading_clf(p: Arc<RobotParams>) -> Result<LieDerivativeChain, ScenarioError> {
    Ok(LieDerivativeChain::new(
        "heading_tracking",
        1,
        2,
        Arc::new(move |s| {
            let (x, y, th, v) = (s[0], s[1], s[2], s[3]);
            let (bx, by) = (p.x_d - x, p.y_d - y);
            let d2 = bx * bx + by * by;
            let bearing = by.atan2(bx);
            let bearing_rate = if d2 > 0.0 {
                v * (by * th.cos() - bx * th.sin()) / d2
            } else {
                0.0
            };
            let e = wrap_angle(th - bearing);
            ChainValues {
                lf: vec![e * e, -2.0 * e * bearing_rate],
                lglf: vec![2.0 * e, 0.0],
            }
        }),
    )?)
}
