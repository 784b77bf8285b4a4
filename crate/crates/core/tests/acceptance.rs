//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero when any of them fails.

mod common;

use std::path::Path;
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tlc_core::analysis::io::read_table;
use tlc_core::analysis::metrics::event_gaps;
use tlc_core::analysis::verify::{acc_interval_samples, chain_fd_error, envelope_states, shipped_scenarios};
use tlc_core::analysis::{run, simulate, RunOutcome, RunRequest};
use tlc_core::certificates::{
    complex_roots, hocbf_row, hocbf_row_from_roots, verify_taylor_identity, zoh_tlc_row, ClassKSpec, XiEstimate,
};
use tlc_core::controller::Method;
use tlc_core::dynamics::ControlVector;
use tlc_core::event_trigger::{robust_bounds, StateBox};
use tlc_core::qp::{kkt_residual, solve, QpStatus};
use tlc_core::scenarios::{default_configs, ScenarioKind, ScenarioParams, ScenarioSpec};

const SEED: u64 = 20240917;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn sim(scenario: ScenarioKind, method: Method, edit: impl FnOnce(&mut RunRequest)) -> RunOutcome {
    let mut req = RunRequest::new(scenario, method);
    edit(&mut req);
    simulate(&req).expect("run resolves")
}

fn status(out: &RunOutcome) -> String {
    match &out.fault {
        None => "completed".into(),
        Some(f) => format!("faulted at t={:.2}: {f}", f.time),
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

fn algebraic_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0_f64;
    let mut rows = 0;
    for (_, spec) in shipped_scenarios() {
        for x in envelope_states(&spec, 100, rng.gen()) {
            let dt = rng.gen_range(0.01..2.0);
            for chain in spec.chains() {
                let v = chain.evaluate(&x).unwrap();
                let tlc = zoh_tlc_row(chain, &x, dt).unwrap();
                let (reference, scale) = match chain.degree() {
                    1 => {
                        let cbf = hocbf_row(chain, &x, &ClassKSpec::new(vec![1.0 / dt]).unwrap()).unwrap();
                        assert_eq!(cbf.a, tlc.a);
                        (cbf.b, v.lf[1].abs() + v.lf[0].abs() / dt)
                    }
                    2 => {
                        let p = complex_roots(dt).unwrap();
                        let hocbf = hocbf_row_from_roots(chain, &x, &p.as_array()).unwrap();
                        assert_eq!(hocbf.a, tlc.a);
                        worst = worst.max(rel(hocbf.b, tlc.b, hocbf.b.abs()));
                        let (sum, prod) = (p.sum().re, p.product().re);
                        (
                            v.lf[2] + sum * v.lf[1] + prod * v.lf[0],
                            v.lf[2].abs() + sum * v.lf[1].abs() + prod * v.lf[0].abs(),
                        )
                    }
                    _ => continue,
                };
                worst = worst.max(rel(tlc.b, reference, scale));
                rows += 1;
            }
        }
    }
    verdict(worst <= 1e-12, format!("{rows} rows, max relative difference {worst:.2e}"))
}

fn taylor_identity() -> Verdict {
    let t: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let cube: Vec<f64> = t.iter().map(|t| t * t * t).collect();
    let r = verify_taylor_identity(&t, &cube, 2).unwrap();
    let (xi_ok, xi) = match r.xi {
        XiEstimate::Bracket { lo, hi, estimate } => (
            (estimate - 1.0 / 3.0).abs() <= 1e-3 && lo - 1e-3 <= 1.0 / 3.0 && 1.0 / 3.0 <= hi + 1e-3,
            format!("xi in [{lo:.5}, {hi:.5}]"),
        ),
        other => (false, format!("xi {other:?}")),
    };
    let (t1, h1) = acc_interval_samples(1e-3).unwrap();
    let (t2, h2) = acc_interval_samples(2e-3).unwrap();
    let fine = verify_taylor_identity(&t1, &h1, 2).unwrap().residual;
    let coarse = verify_taylor_identity(&t2, &h2, 2).unwrap().residual;
    let bound = 1e-4 * h1.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    verdict(
        xi_ok && fine <= bound && fine < coarse,
        format!("{xi}; ACC residual {fine:.2e} (bound {bound:.2e}), {coarse:.2e} at twice the spacing"),
    )
}

fn qp_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_obj, mut worst_kkt, mut mismatched, mut optimal) = (0.0_f64, 0.0_f64, 0, 0);
    for _ in 0..200 {
        let qp = common::random_program(&mut rng);
        let sol = solve(&qp).unwrap();
        let grid = common::brute_force(&qp);
        match (sol.status, grid) {
            (QpStatus::Optimal, g) => {
                optimal += 1;
                worst_kkt = worst_kkt.max(kkt_residual(&qp, &sol));
                if let Some(g) = g {
                    worst_obj = worst_obj.max((sol.objective - g).abs());
                }
            }
            (QpStatus::Infeasible, Some(_)) => mismatched += 1,
            (QpStatus::Infeasible, None) => {}
        }
    }
    verdict(
        worst_obj <= 1e-2 && worst_kkt <= 1e-8 && mismatched == 0,
        format!(
            "{optimal}/200 optimal, max objective gap {worst_obj:.2e}, max KKT residual {worst_kkt:.2e}, {mismatched} feasibility mismatches"
        ),
    )
}

fn acc_safety_ordering() -> Vec<(String, Verdict)> {
    let etlc = sim(ScenarioKind::Acc, Method::Etlc, |_| {});
    let fine = sim(ScenarioKind::Acc, Method::Tlc, |_| {});
    let coarse = sim(ScenarioKind::Acc, Method::Tlc, |r| r.config.acc.dt = 1.0);
    let h = |o: &RunOutcome| o.metrics.worst_h();
    let done = |o: &RunOutcome| o.fault.is_none();
    let violation = |o: &RunOutcome| (-h(o)).max(0.0);
    vec![
        (
            "4a ACC event-triggered TLC keeps h >= 0".into(),
            verdict(done(&etlc) && h(&etlc) >= 0.0, format!("min h {:.4}, {}", h(&etlc), status(&etlc))),
        ),
        (
            "4b ACC TLC dt=0.1 keeps h >= -0.5".into(),
            verdict(done(&fine) && h(&fine) >= -0.5, format!("min h {:.4}, {}", h(&fine), status(&fine))),
        ),
        (
            "4c ACC TLC dt=1 violates h".into(),
            verdict(done(&coarse) && h(&coarse) < 0.0, format!("min h {:.4}, {}", h(&coarse), status(&coarse))),
        ),
        (
            "4d ACC violation grows with dt".into(),
            verdict(
                done(&fine) && done(&coarse) && violation(&coarse) > violation(&fine),
                format!("violation {:.4} at dt=1 vs {:.4} at dt=0.1", violation(&coarse), violation(&fine)),
            ),
        ),
    ]
}

fn acc_behavior() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for method in [Method::Hocbf, Method::Tlc, Method::Etlc] {
        let out = sim(ScenarioKind::Acc, method, |_| {});
        let ScenarioParams::Acc(p) = &out.resolved.spec.params else { unreachable!() };
        let (lo, hi) = (-0.7 * p.mass * 9.81, 0.4 * p.mass * 9.81);
        let v = out.log.state_series(0);
        let t_end = p.t_end;
        let tail_ok = out
            .log
            .times
            .iter()
            .zip(&v)
            .filter(|(t, _)| **t >= t_end - 5.0)
            .all(|(_, v)| (v - 13.89).abs() <= 0.5);
        let controls_ok = out.log.controls.iter().all(|u| u[0] >= lo && u[0] <= hi);
        let pass = out.fault.is_none() && v[0] == 24.0 && tail_ok && controls_ok;
        ok &= pass;
        parts.push(format!(
            "{} final v {:.3} ({})",
            method.as_str(),
            v[v.len() - 1],
            status(&out)
        ));
    }
    verdict(ok, parts.join("; "))
}

fn current_box(boxes: &[(f64, StateBox)], t: f64) -> Option<&StateBox> {
    boxes.iter().rev().find(|(te, _)| *te <= t).map(|(_, b)| b)
}

fn event_trigger_properties() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for scenario in [ScenarioKind::Acc, ScenarioKind::Robot] {
        let etlc = sim(scenario, Method::Etlc, |_| {});
        let tlc = sim(scenario, Method::Tlc, |_| {});
        let log = &etlc.log;

        let outside = log
            .times
            .iter()
            .zip(&log.states)
            .filter(|(t, _)| !log.event_times.contains(t))
            .filter(|(t, x)| current_box(&etlc.boxes, **t).is_some_and(|b| !b.contains(x)))
            .count();

        // h within 10% of its range above the minimum
        let h = &log.h_values[0];
        let (hmin, hmax) = h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(*v), a.1.max(*v)));
        let gaps = event_gaps(&log.event_times);
        let cluster = gaps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| log.event_times[i]);
        let near_min = |t: f64| {
            log.times
                .iter()
                .position(|s| *s == t)
                .is_some_and(|k| h[k] - hmin <= 0.1 * (hmax - hmin))
        };
        let cluster_ok = cluster.is_some_and(near_min);

        let fewer = etlc.fault.is_none() && tlc.fault.is_none() && log.qp_count < tlc.log.qp_count;
        ok &= outside == 0 && cluster_ok && fewer;
        parts.push(format!(
            "{}: {outside} box violations, densest events at t={} ({}), qp {} vs {} ({}; {})",
            scenario.as_str(),
            cluster.map_or("none".into(), |t| format!("{t:.2}")),
            if cluster_ok { "near min h" } else { "away from min h" },
            log.qp_count,
            tlc.log.qp_count,
            status(&etlc),
            status(&tlc),
        ));
    }
    verdict(ok, parts.join("; "))
}

fn extreme_controls(spec: &ScenarioSpec, sign: &[f64]) -> Vec<ControlVector> {
    let b = spec.system.control_box();
    let q = b.dim();
    (0..1usize << q)
        .map(|mask| {
            ControlVector::from_fn(q, |k, _| match (mask & (1 << k) != 0, sign[k] >= 0.0) {
                (false, _) => 0.0,
                (true, true) => b.upper()[k],
                (true, false) => b.lower()[k],
            })
        })
        .collect()
}

fn robust_conservatism() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = f64::INFINITY;
    for (_, spec) in shipped_scenarios().into_iter().filter(|(n, _)| n != "robot_tls") {
        let d = default_configs(&spec);
        let n = spec.system.state_dim();
        let q = spec.system.control_dim();
        for x in envelope_states(&spec, 100, rng.gen()) {
            let lower: Vec<f64> = d.event.lower_offsets.iter().map(|o| 2.0 * o * rng.gen::<f64>()).collect();
            let upper: Vec<f64> = d.event.upper_offsets.iter().map(|o| 2.0 * o * rng.gen::<f64>()).collect();
            let sb = StateBox::new(&x, &lower, &upper).unwrap();
            let sign: Vec<f64> = (0..q).map(|_| if rng.gen() { 1.0 } else { -1.0 }).collect();
            let samples = sb.grid(if n <= 2 { 41 } else { 9 });
            for chain in &spec.safety {
                let robust = robust_bounds(chain, &sb, d.controller.dt, &sign, d.event.grid_per_dim)
                    .unwrap()
                    .to_row();
                for y in &samples {
                    let exact = zoh_tlc_row(chain, y, d.controller.dt).unwrap();
                    for u in extreme_controls(&spec, &sign) {
                        worst = worst.min(exact.lhs(&u) - robust.lhs(&u));
                    }
                }
            }
        }
    }
    verdict(worst >= -1e-9, format!("smallest margin {worst:.3e} over 200 boxes"))
}

fn robot_behavior() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for method in [Method::Hocbf, Method::Etlc] {
        let out = sim(ScenarioKind::Robot, method, |_| {});
        let ScenarioParams::Robot(p) = &out.resolved.spec.params else { unreachable!() };
        let log = &out.log;
        let clearance = log
            .states
            .iter()
            .map(|x| (x[0] - p.x_o).powi(2) + (x[1] - p.y_o).powi(2) - p.r * p.r)
            .fold(f64::INFINITY, f64::min)
            .min(out.metrics.min_h.get("obstacle").copied().unwrap_or(f64::INFINITY));
        let last = &log.states[log.len() - 1];
        let dist = ((last[0] - p.x_d).powi(2) + (last[1] - p.y_d).powi(2)).sqrt();
        let limits = log.states.iter().all(|x| x[3] >= p.v_min && x[3] <= p.v_max)
            && log
                .controls
                .iter()
                .all(|u| u[0].abs() <= p.u1_max && u[1].abs() <= p.u2_max);
        let pass = out.fault.is_none() && clearance >= 0.0 && dist <= 2.0 && limits;
        ok &= pass;
        parts.push(format!(
            "{} clearance {clearance:.3}, goal distance {dist:.2}, limits {} ({})",
            method.as_str(),
            if limits { "held" } else { "broken" },
            status(&out)
        ));
    }
    verdict(ok, parts.join("; "))
}

fn psi1_rows(dir: &Path) -> Vec<(f64, f64)> {
    let t = read_table(&dir.join("psi1.csv")).unwrap();
    let im = t.column("psi1_im").unwrap();
    let h = t.column("h").unwrap();
    h.into_iter().zip(im).collect()
}

fn complex_plane_diagnostic() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for scenario in [ScenarioKind::Acc, ScenarioKind::Robot] {
        for method in [Method::Hocbf, Method::Tlc, Method::Etlc] {
            let dir = tempfile::tempdir().unwrap();
            let mut req = RunRequest::new(scenario, method);
            req.out_dir = Some(dir.path().to_path_buf());
            run(&req).unwrap();
            let rows = psi1_rows(dir.path());
            let bad = rows
                .iter()
                .filter(|(h, im)| match method {
                    Method::Hocbf => *im != 0.0,
                    _ => *h != 0.0 && *im == 0.0,
                })
                .count();
            ok &= bad == 0 && !rows.is_empty();
            parts.push(format!("{}/{} {bad}/{} bad rows", scenario.as_str(), method.as_str(), rows.len()));
        }
    }
    verdict(ok, parts.join(", "))
}

fn chain_validation() -> Verdict {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (_, spec) in shipped_scenarios() {
        for i in 0..spec.chains().count() {
            worst = worst.max(chain_fd_error(&spec, i, 100, SEED).unwrap());
            count += 1;
        }
    }
    verdict(worst <= 1e-4, format!("{count} chains, worst relative error {worst:.2e}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(String, Verdict)> = vec![
        ("1 row equivalences".into(), algebraic_equivalence()),
        ("2 Taylor-Lagrange identity".into(), taylor_identity()),
        ("3 QP oracle".into(), qp_oracle()),
    ];
    results.extend(acc_safety_ordering());
    results.push(("5 ACC speed and control limits".into(), acc_behavior()));
    results.push(("6 event-trigger properties".into(), event_trigger_properties()));
    results.push(("7 robust-bound conservatism".into(), robust_conservatism()));
    results.push(("8 robot obstacle, goal and limits".into(), robot_behavior()));
    results.push(("9 complex-plane diagnostic".into(), complex_plane_diagnostic()));
    results.push(("10 Lie-chain validation".into(), chain_validation()));

    let w = results.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, v) in &results {
        println!("{}  {name:<w$}  {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = results.iter().filter(|(_, v)| !v.passed).count();
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
