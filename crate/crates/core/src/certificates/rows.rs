use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlVector, StateVector};

use super::{CertificateError, ChainValues, LieDerivativeChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    /// `a·u + b ≥ 0`
    Geq,
    /// `a·u + b ≤ 0`
    Leq,
}

/// One affine inequality in the control.
///
/// When `slack_coupled` is set the right-hand side is the QP slack `δ`
/// instead of zero (`a·u + b ≤ δ` for stability rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceRow {
    pub a: Vec<f64>,
    pub b: f64,
    pub sense: RowSense,
    pub slack_coupled: bool,
}

impl HalfspaceRow {
    pub fn geq(a: Vec<f64>, b: f64) -> Self {
        Self {
            a,
            b,
            sense: RowSense::Geq,
            slack_coupled: false,
        }
    }

    pub fn leq_with_slack(a: Vec<f64>, b: f64) -> Self {
        Self {
            a,
            b,
            sense: RowSense::Leq,
            slack_coupled: true,
        }
    }

    pub fn control_dim(&self) -> usize {
        self.a.len()
    }

    /// `a·u + b`.
    pub fn lhs(&self, u: &ControlVector) -> f64 {
        self.a.iter().zip(u.iter()).map(|(a, u)| a * u).sum::<f64>() + self.b
    }

    /// Signed margin, nonnegative when satisfied (slack taken as `slack`).
    pub fn margin(&self, u: &ControlVector, slack: f64) -> f64 {
        let lhs = self.lhs(u);
        let rhs = if self.slack_coupled { slack } else { 0.0 };
        match self.sense {
            RowSense::Geq => lhs + rhs,
            RowSense::Leq => rhs - lhs,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.a.iter().all(|a| a.is_finite())
    }
}

fn check_step(dt: f64) -> Result<(), CertificateError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(CertificateError::InvalidStep(dt))
    }
}

/// `[dtᵏ / k!]` for `k = 0..=m`.
pub fn taylor_coefficients(m: usize, dt: f64) -> Result<Vec<f64>, CertificateError> {
    if m == 0 {
        return Err(CertificateError::InvalidDegree(m));
    }
    check_step(dt)?;
    let mut out = Vec::with_capacity(m + 1);
    let mut c = 1.0;
    out.push(c);
    for k in 1..=m {
        c *= dt / k as f64;
        out.push(c);
    }
    Ok(out)
}

/// `Σₖ L_fᵏh · dtᵏ/k!` multiplied through by `m!/dtᵐ`, i.e. `Σₖ m!/(k!·dt^{m-k}) · L_fᵏh`.
///
/// After this normalization the coefficient of `L_f^m h` (and of the control
/// term) is exactly one.
pub fn normalized_taylor_sum(lf: &[f64], dt: f64) -> f64 {
    let m = lf.len() - 1;
    // weight_k = m!/(k! dt^{m-k}), built downward from weight_m = 1
    let mut weight = 1.0;
    let mut sum = lf[m];
    for k in (0..m).rev() {
        weight *= (k + 1) as f64 / dt;
        sum += weight * lf[k];
    }
    sum
}

/// Zero-order-hold Taylor-Lagrange safety row: `lglf·u + Σ (m!/(k! dt^{m-k})) L_fᵏh ≥ 0`.
pub fn zoh_tlc_row(
    chain: &LieDerivativeChain,
    x: &StateVector,
    dt: f64,
) -> Result<HalfspaceRow, CertificateError> {
    check_step(dt)?;
    let v = chain.evaluate(x)?;
    Ok(HalfspaceRow::geq(v.lglf, normalized_taylor_sum(&v.lf, dt)))
}

/// Zero-order-hold Taylor-Lagrange stability row, relaxed by the slack.
pub fn zoh_tls_row(
    chain: &LieDerivativeChain,
    x: &StateVector,
    dt: f64,
) -> Result<HalfspaceRow, CertificateError> {
    check_step(dt)?;
    let v = chain.evaluate(x)?;
    Ok(HalfspaceRow::leq_with_slack(
        v.lglf,
        normalized_taylor_sum(&v.lf, dt),
    ))
}

/// CLF row `L_gV·u + L_fV + c3·V ≤ δ` for a relative-degree-one `V`.
pub fn clf_row(
    chain: &LieDerivativeChain,
    x: &StateVector,
    c3: f64,
) -> Result<HalfspaceRow, CertificateError> {
    if chain.degree() != 1 {
        return Err(CertificateError::DegreeMismatch {
            expected: 1,
            got: chain.degree(),
        });
    }
    if !(c3 > 0.0) || !c3.is_finite() {
        return Err(CertificateError::NonPositiveGain(vec![c3]));
    }
    let v = chain.evaluate(x)?;
    Ok(HalfspaceRow::leq_with_slack(v.lglf, v.lf[1] + c3 * v.lf[0]))
}

/// Linear class-K gains `αᵢ(s) = pᵢ·s`, one per order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassKSpec {
    gains: Vec<f64>,
}

impl ClassKSpec {
    pub fn new(gains: Vec<f64>) -> Result<Self, CertificateError> {
        if gains.is_empty() || gains.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(CertificateError::NonPositiveGain(gains));
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn order(&self) -> usize {
        self.gains.len()
    }

    /// The first `m` gains, for a constraint of lower relative degree.
    pub fn truncated(&self, m: usize) -> Result<Self, CertificateError> {
        if m > self.gains.len() || m == 0 {
            return Err(CertificateError::GainCount {
                expected: m,
                got: self.gains.len(),
            });
        }
        Ok(Self {
            gains: self.gains[..m].to_vec(),
        })
    }
}

/// Coefficients `e₀..e_m` (ascending powers) of `∏ᵢ (s + pᵢ)`.
pub fn class_k_polynomial(roots: &[Complex64]) -> Vec<Complex64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for p in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k] += c * p;
            next[k + 1] += c;
        }
        poly = next;
    }
    poly
}

fn expanded_row(v: ChainValues, poly: &[f64]) -> HalfspaceRow {
    let m = v.lf.len() - 1;
    let b = v.lf[m] + (0..m).map(|k| poly[k] * v.lf[k]).sum::<f64>();
    HalfspaceRow::geq(v.lglf, b)
}

/// HOCBF row with linear class-K functions: `ψ_m = ψ̇_{m-1} + p_m ψ_{m-1} ≥ 0`
/// expanded into `lglf·u + L_fᵐh + Σ eₖ L_fᵏh ≥ 0`.
pub fn hocbf_row(
    chain: &LieDerivativeChain,
    x: &StateVector,
    spec: &ClassKSpec,
) -> Result<HalfspaceRow, CertificateError> {
    if spec.order() != chain.degree() {
        return Err(CertificateError::GainCount {
            expected: chain.degree(),
            got: spec.order(),
        });
    }
    let roots: Vec<Complex64> = spec.gains().iter().map(|p| Complex64::new(*p, 0.0)).collect();
    let poly: Vec<f64> = class_k_polynomial(&roots).iter().map(|c| c.re).collect();
    Ok(expanded_row(chain.evaluate(x)?, &poly))
}

/// HOCBF row from (possibly complex) class-K coefficients.
///
/// The roots must come in conjugate pairs so the expanded polynomial is real;
/// otherwise [`CertificateError::ComplexCoefficients`] is returned.
pub fn hocbf_row_from_roots(
    chain: &LieDerivativeChain,
    x: &StateVector,
    roots: &[Complex64],
) -> Result<HalfspaceRow, CertificateError> {
    if roots.len() != chain.degree() {
        return Err(CertificateError::GainCount {
            expected: chain.degree(),
            got: roots.len(),
        });
    }
    let poly = class_k_polynomial(roots);
    let scale = poly.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let imag = poly.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if imag > 1e-12 * scale {
        return Err(CertificateError::ComplexCoefficients(imag));
    }
    let poly: Vec<f64> = poly.iter().map(|c| c.re).collect();
    Ok(expanded_row(chain.evaluate(x)?, &poly))
}

#[allow(dead_code)]
pub(crate) fn row_coefficients(row: &HalfspaceRow) -> DVector<f64> {
    DVector::from_iterator(
        row.a.len() + 1,
        row.a.iter().copied().chain(std::iter::once(row.b)),
    )
}
