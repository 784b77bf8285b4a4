use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certificates::{finite_diff_chain_check, verify_taylor_identity, XiEstimate};
use crate::controller::Method;
use crate::dynamics::{ControlVector, StateVector};
use crate::scenarios::{
    make_acc, make_robot, AccParams, RobotParams, ScenarioKind, ScenarioSpec, StabilityMode,
};

use super::run::{simulate, RunRequest};
use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// `h` along one recorded closed-loop ACC interval, resampled every `spacing`
/// seconds by re-integrating from the logged state under the logged control.
pub fn acc_interval_samples(spacing: f64) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let out = simulate(&RunRequest::new(ScenarioKind::Acc, Method::Tlc))?;
    let log = &out.log;
    let spec = &out.resolved.spec;
    let dt = out.resolved.controller.dt;
    let k = log.len().checked_sub(1).ok_or_else(|| {
        AnalysisError::Simulation("ACC run logged no samples".into())
    })?;
    let (t0, x0, u) = (log.times[k], log.states[k].clone(), log.controls[k].clone());
    let n = (dt / spacing).round() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut h = Vec::with_capacity(n + 1);
    let mut x = x0;
    for i in 0..=n {
        if i > 0 {
            x = spec
                .system
                .integrate_zoh_step(&x, &u, spacing, 10)
                .map_err(|e| AnalysisError::Simulation(e.to_string()))?;
        }
        times.push(t0 + i as f64 * spacing);
        h.push(spec.safety[0].value(&x).map_err(|e| AnalysisError::Simulation(e.to_string()))?);
    }
    Ok((times, h))
}

/// Uniform sample of `n` states inside the scenario envelope.
pub fn envelope_states(spec: &ScenarioSpec, n: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = spec.envelope();
    (0..n)
        .map(|_| StateVector::from_iterator(env.len(), env.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi))))
        .collect()
}

fn random_control(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> ControlVector {
    let b = spec.system.control_box();
    ControlVector::from_iterator(
        b.dim(),
        b.lower().iter().zip(b.upper().iter()).map(|(l, h)| rng.gen_range(*l..=*h)),
    )
}

/// Every shipped scenario variant.
pub fn shipped_scenarios() -> Vec<(String, ScenarioSpec)> {
    let acc = make_acc(AccParams::default()).expect("default ACC parameters are valid");
    let clf = make_robot(RobotParams::default()).expect("default robot parameters are valid");
    let tls = make_robot(RobotParams {
        stability: StabilityMode::TlsM2,
        ..RobotParams::default()
    })
    .expect("default robot parameters are valid");
    vec![
        ("acc".into(), acc),
        ("robot".into(), clf),
        ("robot_tls".into(), tls),
    ]
}

/// Worst finite-difference relative error of one chain over random envelope states.
pub fn chain_fd_error(
    spec: &ScenarioSpec,
    chain_index: usize,
    states: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    let chain = spec
        .chains()
        .nth(chain_index)
        .ok_or_else(|| AnalysisError::Config(format!("no chain #{chain_index}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0_f64;
    for x in envelope_states(spec, states, seed) {
        let u = random_control(spec, &mut rng);
        let e = finite_diff_chain_check(&spec.system, chain, &x, &u, 1e-4)
            .map_err(|e| AnalysisError::Simulation(e.to_string()))?;
        worst = worst.max(e);
    }
    Ok(worst)
}

pub fn run_checks(seed: u64) -> Result<Vec<CheckResult>, AnalysisError> {
    let mut out = Vec::new();

    let t: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let cube: Vec<f64> = t.iter().map(|t| t * t * t).collect();
    let r = verify_taylor_identity(&t, &cube, 2).map_err(|e| AnalysisError::Simulation(e.to_string()))?;
    let (passed, detail) = match r.xi {
        XiEstimate::Bracket { lo, hi, estimate } => (
            (estimate - 1.0 / 3.0).abs() <= 1e-3,
            format!("xi in [{lo:.4}, {hi:.4}], estimate {estimate:.6}"),
        ),
        other => (false, format!("{other:?}")),
    };
    out.push(CheckResult {
        name: "taylor identity t^3, xi near 1/3".into(),
        passed,
        detail,
    });

    let (t1, h1) = acc_interval_samples(1e-3)?;
    let (t2, h2) = acc_interval_samples(2e-3)?;
    let fine = verify_taylor_identity(&t1, &h1, 2).map_err(|e| AnalysisError::Simulation(e.to_string()))?;
    let coarse = verify_taylor_identity(&t2, &h2, 2).map_err(|e| AnalysisError::Simulation(e.to_string()))?;
    let hmax = h1.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    out.push(CheckResult {
        name: "taylor identity on ACC interval".into(),
        passed: fine.residual <= 1e-4 * hmax && fine.residual <= coarse.residual,
        detail: format!(
            "residual {:.3e} at 1e-3 (bound {:.3e}), {:.3e} at 2e-3",
            fine.residual,
            1e-4 * hmax,
            coarse.residual
        ),
    });

    for (name, spec) in shipped_scenarios() {
        for (i, chain) in spec.chains().enumerate() {
            let e = chain_fd_error(&spec, i, 100, seed)?;
            out.push(CheckResult {
                name: format!("chain {name}/{}", chain.name()),
                passed: e <= 1e-4,
                detail: format!("max relative error {e:.3e}"),
            });
        }
    }
    Ok(out)
}

pub fn format_checks(checks: &[CheckResult]) -> String {
    let w = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| {
            format!(
                "{}  {:<w$}  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )
        })
        .collect()
}
