use proptest::prelude::*;

use tlc_core::certificates::zoh_tlc_row;
use tlc_core::dynamics::{ControlVector, StateVector};
use tlc_core::event_trigger::{robust_bounds, StateBox};
use tlc_core::scenarios::{default_configs, make_acc, make_robot, AccParams, RobotParams, ScenarioSpec};

fn scenario(which: usize) -> ScenarioSpec {
    if which == 0 {
        make_acc(AccParams::default()).unwrap()
    } else {
        make_robot(RobotParams::default()).unwrap()
    }
}

fn point(spec: &ScenarioSpec, unit: &[f64]) -> StateVector {
    let env = spec.envelope();
    StateVector::from_iterator(env.len(), env.iter().zip(unit).map(|((lo, hi), s)| lo + s * (hi - lo)))
}

fn random_box(spec: &ScenarioSpec, unit: &[f64], lo: &[f64], hi: &[f64]) -> StateBox {
    let d = default_configs(spec).event;
    let n = spec.system.state_dim();
    let lower: Vec<f64> = (0..n).map(|i| 2.0 * lo[i] * d.lower_offsets[i]).collect();
    let upper: Vec<f64> = (0..n).map(|i| 2.0 * hi[i] * d.upper_offsets[i]).collect();
    StateBox::new(&point(spec, unit), &lower, &upper).unwrap()
}

/// Corners of the sign-consistent part of the control box, the origin included.
fn extreme_controls(spec: &ScenarioSpec, sign: &[f64]) -> Vec<ControlVector> {
    let b = spec.system.control_box();
    let q = b.dim();
    (0..1usize << q)
        .map(|mask| {
            ControlVector::from_fn(q, |k, _| {
                if mask & (1 << k) == 0 {
                    0.0
                } else if sign[k] >= 0.0 {
                    b.upper()[k]
                } else {
                    b.lower()[k]
                }
            })
        })
        .collect()
}

fn dense_samples(sb: &StateBox) -> Vec<StateVector> {
    sb.grid(if sb.dim() <= 2 { 41 } else { 9 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn robust_row_never_exceeds_exact_row(
        which in 0usize..2,
        unit in prop::collection::vec(0.0..1.0f64, 4),
        lo in prop::collection::vec(0.0..1.0f64, 4),
        hi in prop::collection::vec(0.0..1.0f64, 4),
        signs in prop::collection::vec(prop::bool::ANY, 2),
    ) {
        let spec = scenario(which);
        let d = default_configs(&spec);
        let sb = random_box(&spec, &unit, &lo, &hi);
        let q = spec.system.control_dim();
        let sign: Vec<f64> = signs[..q].iter().map(|s| if *s { 1.0 } else { -1.0 }).collect();
        let dt = d.controller.dt;
        for chain in &spec.safety {
            let r = robust_bounds(chain, &sb, dt, &sign, d.event.grid_per_dim).unwrap();
            let robust = r.to_row();
            for y in dense_samples(&sb) {
                let exact = zoh_tlc_row(chain, &y, dt).unwrap();
                for u in extreme_controls(&spec, &sign) {
                    let margin = exact.lhs(&u) - robust.lhs(&u);
                    prop_assert!(margin >= -1e-9, "{}: margin {margin:e} at {:?}", chain.name(), y.as_slice());
                }
            }
        }
    }

    #[test]
    fn larger_box_is_never_looser(
        which in 0usize..2,
        unit in prop::collection::vec(0.0..1.0f64, 4),
        lo in prop::collection::vec(0.0..0.5f64, 4),
        hi in prop::collection::vec(0.0..0.5f64, 4),
        grow in 1.0..2.0f64,
        signs in prop::collection::vec(prop::bool::ANY, 2),
    ) {
        let spec = scenario(which);
        let d = default_configs(&spec);
        let small = random_box(&spec, &unit, &lo, &hi);
        let big = StateBox {
            lower_offsets: small.lower_offsets.iter().map(|o| o * grow).collect(),
            upper_offsets: small.upper_offsets.iter().map(|o| o * grow).collect(),
            ..small.clone()
        };
        let q = spec.system.control_dim();
        let sign: Vec<f64> = signs[..q].iter().map(|s| if *s { 1.0 } else { -1.0 }).collect();
        for chain in &spec.safety {
            let a = robust_bounds(chain, &small, d.controller.dt, &sign, d.event.grid_per_dim).unwrap();
            let b = robust_bounds(chain, &big, d.controller.dt, &sign, d.event.grid_per_dim).unwrap();
            let tol = 1e-9 * a.h_r.abs().max(1.0);
            prop_assert!(b.h_r <= a.h_r + tol, "{}: h_r {} -> {}", chain.name(), a.h_r, b.h_r);
            for ((s, gb), ga) in sign.iter().zip(&b.g).zip(&a.g) {
                prop_assert!(s * gb <= s * ga + 1e-9 * ga.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_offsets_reproduce_exact_row(
        which in 0usize..2,
        unit in prop::collection::vec(0.0..1.0f64, 4),
        dt in 0.01..1.0f64,
    ) {
        let spec = scenario(which);
        let x = point(&spec, &unit);
        let n = x.len();
        let sb = StateBox::new(&x, &vec![0.0; n], &vec![0.0; n]).unwrap();
        let sign = vec![1.0; spec.system.control_dim()];
        for chain in &spec.safety {
            let r = robust_bounds(chain, &sb, dt, &sign, 5).unwrap();
            let exact = zoh_tlc_row(chain, &x, dt).unwrap();
            prop_assert!((r.h_r - exact.b).abs() <= 1e-12 * exact.b.abs().max(1.0));
            for (g, a) in r.g.iter().zip(&exact.a) {
                prop_assert!((g - a).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
