use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificates::{ChainValues, LieDerivativeChain};
use crate::dynamics::{ControlAffineSystem, ControlBox};

use super::{ScenarioError, ScenarioKind, ScenarioParams, ScenarioSpec, StabilityConstraint, StabilityKind, TrackingTarget};

/// Adaptive cruise control: ego speed `v` and gap `z` to a lead vehicle at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccParams {
    pub v0: f64,
    pub v_d: f64,
    pub mass: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub c: f64,
    pub c_a: f64,
    pub c_d: f64,
    pub g: f64,
    pub v_init: f64,
    pub z_init: f64,
    pub dt: f64,
    pub d_t: f64,
    pub offsets: [f64; 2],
    pub t_end: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            v0: 13.89,
            v_d: 24.0,
            mass: 1650.0,
            f0: 0.1,
            f1: 5.0,
            f2: 0.25,
            c: 10.0,
            c_a: 0.4,
            c_d: 0.7,
            g: 9.81,
            v_init: 24.0,
            z_init: 90.0,
            dt: 0.1,
            d_t: 0.03,
            offsets: [0.5, 1.0],
            t_end: 40.0,
        }
    }
}

impl AccParams {
    /// Rolling resistance `f0 + f1·v + f2·v²`.
    pub fn resistance(&self, v: f64) -> f64 {
        self.f0 + self.f1 * v + self.f2 * v * v
    }

    pub fn control_bounds(&self) -> (f64, f64) {
        (
            -self.c_d * self.mass * self.g,
            self.c_a * self.mass * self.g,
        )
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("v0", self.v0),
            ("v_d", self.v_d),
            ("mass", self.mass),
            ("f0", self.f0),
            ("f1", self.f1),
            ("f2", self.f2),
            ("c", self.c),
            ("c_a", self.c_a),
            ("c_d", self.c_d),
            ("g", self.g),
            ("v_init", self.v_init),
            ("z_init", self.z_init),
            ("dt", self.dt),
            ("d_t", self.d_t),
            ("t_end", self.t_end),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ScenarioError::InvalidParameter(format!(
                    "acc.{name} must be positive, got {v}"
                )));
            }
        }
        if self.offsets.iter().any(|o| !(*o >= 0.0) || !o.is_finite()) {
            return Err(ScenarioError::InvalidParameter(format!(
                "acc.offsets must be nonnegative, got {:?}",
                self.offsets
            )));
        }
        Ok(())
    }
}

pub fn make_acc(params: AccParams) -> Result<ScenarioSpec, ScenarioError> {
    params.validate()?;
    let p = Arc::new(params.clone());

    let pf = p.clone();
    let drift = Arc::new(move |x: &DVector<f64>| {
        DVector::from_vec(vec![-pf.resistance(x[0]) / pf.mass, pf.v0 - x[0]])
    });
    let pg = p.clone();
    let input_map = Arc::new(move |_: &DVector<f64>| {
        DMatrix::from_column_slice(2, 1, &[1.0 / pg.mass, 0.0])
    });
    let (lo, hi) = p.control_bounds();
    let bx = ControlBox::new(DVector::from_element(1, lo), DVector::from_element(1, hi))?;
    let system = ControlAffineSystem::new(2, 1, drift, input_map, bx)?.with_names(&["v", "z"], &["u"]);

    let ps = p.clone();
    let safety = LieDerivativeChain::new(
        "distance",
        2,
        1,
        Arc::new(move |x| {
            let (v, z) = (x[0], x[1]);
            ChainValues {
                lf: vec![z - ps.c, ps.v0 - v, ps.resistance(v) / ps.mass],
                lglf: vec![-1.0 / ps.mass],
            }
        }),
    )?;

    let pv = p.clone();
    let speed = LieDerivativeChain::new(
        "speed",
        1,
        1,
        Arc::new(move |x| {
            let e = x[0] - pv.v_d;
            ChainValues {
                lf: vec![e * e, -2.0 * e * pv.resistance(x[0]) / pv.mass],
                lglf: vec![2.0 * e / pv.mass],
            }
        }),
    )?;

    Ok(ScenarioSpec {
        kind: ScenarioKind::Acc,
        system,
        safety: vec![safety],
        stability: vec![StabilityConstraint {
            chain: speed,
            kind: StabilityKind::Tls,
        }],
        x0: DVector::from_vec(vec![p.v_init, p.z_init]),
        tracking: TrackingTarget::State {
            index: 0,
            target: p.v0,
        },
        t_end: p.t_end,
        params: ScenarioParams::Acc(params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resistance_at_initial_speed() {
        assert!((AccParams::default().resistance(24.0) - 264.1).abs() < 1e-12);
    }

    #[test]
    fn control_box_from_mass() {
        let (lo, hi) = AccParams::default().control_bounds();
        assert!((lo + 11330.55).abs() < 1e-9);
        assert!((hi - 6474.6).abs() < 1e-9);
    }

    #[test]
    fn chain_at_initial_state() {
        let spec = make_acc(AccParams::default()).unwrap();
        let v = spec.safety[0].evaluate(&spec.x0).unwrap();
        assert_eq!(v.lf[0], 80.0);
        assert!((v.lf[1] + 10.11).abs() < 1e-12);
        assert!((v.lf[2] - 0.16006).abs() < 1e-5);
        assert!((v.lglf[0] + 6.0606e-4).abs() < 1e-8);
    }

    #[test]
    fn lead_speed_equilibrium() {
        let p = AccParams::default();
        let spec = make_acc(p.clone()).unwrap();
        let x = DVector::from_vec(vec![p.v0, 50.0]);
        let u = DVector::from_element(1, p.resistance(p.v0));
        let dx = spec.system.eval_dynamics(&x, &u).unwrap();
        assert!(dx.amax() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let p = AccParams {
            mass: 0.0,
            ..AccParams::default()
        };
        assert!(make_acc(p).is_err());
    }
}
