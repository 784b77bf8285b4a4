use crate::dynamics::{ControlAffineSystem, ControlVector, StateVector};

use super::{CertificateError, LieDerivativeChain};

/// Worst relative error between the hand-coded chain and central differences
/// of its own lower-order terms.
///
/// Checks `L_f^{k+1} h` against the derivative of `L_f^k h` along `f`, each
/// component of `L_g L_f^{m-1} h` against the derivative of `L_f^{m-1} h`
/// along the matching column of `g`, and the total rate
/// `L_f^m h + L_g L_f^{m-1} h·u` against the derivative along `f + g·u`.
pub fn finite_diff_chain_check(
    sys: &ControlAffineSystem,
    chain: &LieDerivativeChain,
    x: &StateVector,
    u: &ControlVector,
    eps: f64,
) -> Result<f64, CertificateError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CertificateError::InvalidStep(eps));
    }
    if x.len() != sys.state_dim() || u.len() != sys.control_dim() {
        return Err(CertificateError::InvalidArgument(format!(
            "state/control sizes {}/{} do not match system {}/{}",
            x.len(),
            u.len(),
            sys.state_dim(),
            sys.control_dim()
        )));
    }
    if chain.control_dim() != sys.control_dim() {
        return Err(CertificateError::Shape {
            chain: chain.name().to_string(),
            what: "lglf",
            expected: sys.control_dim(),
            got: chain.control_dim(),
        });
    }
    let m = chain.degree();
    let here = chain.evaluate(x)?;
    let floor = 1e-6 * (1.0 + here.lf.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    let rel = |an: f64, fd: f64| (fd - an).abs() / an.abs().max(fd.abs()).max(floor);

    let directional = |dir: &StateVector, k: usize| -> Result<f64, CertificateError> {
        let plus = chain.evaluate(&(x + dir * eps))?.lf[k];
        let minus = chain.evaluate(&(x - dir * eps))?.lf[k];
        Ok((plus - minus) / (2.0 * eps))
    };

    let f = sys.drift(x);
    let g = sys.input_map(x);
    let mut worst = 0.0_f64;
    for k in 0..m {
        worst = worst.max(rel(here.lf[k + 1], directional(&f, k)?));
    }
    for j in 0..sys.control_dim() {
        let col: StateVector = g.column(j).into_owned();
        worst = worst.max(rel(here.lglf[j], directional(&col, m - 1)?));
    }
    let closed = &f + &g * u;
    let rate = here.lf[m]
        + here
            .lglf
            .iter()
            .zip(u.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>();
    worst = worst.max(rel(rate, directional(&closed, m - 1)?));
    Ok(worst)
}
