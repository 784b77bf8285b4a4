use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::StateVector;

use super::{CertificateError, LieDerivativeChain};

/// The conjugate class-K coefficient pair implied by a second-order ZOH-TLC row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexRootPair {
    pub p1: Complex64,
    pub p2: Complex64,
}

impl ComplexRootPair {
    pub fn sum(&self) -> Complex64 {
        self.p1 + self.p2
    }

    pub fn product(&self) -> Complex64 {
        self.p1 * self.p2
    }

    pub fn as_array(&self) -> [Complex64; 2] {
        [self.p1, self.p2]
    }
}

/// `p1 = (1 - i)/dt`, `p2 = (1 + i)/dt`.
pub fn complex_roots(dt: f64) -> Result<ComplexRootPair, CertificateError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CertificateError::InvalidStep(dt));
    }
    let r = 1.0 / dt;
    Ok(ComplexRootPair {
        p1: Complex64::new(r, -r),
        p2: Complex64::new(r, r),
    })
}

/// `L_f h(x) + gain·h(x)`.
pub fn psi1_with_gain(
    chain: &LieDerivativeChain,
    x: &StateVector,
    gain: Complex64,
) -> Result<Complex64, CertificateError> {
    if chain.degree() < 2 {
        return Err(CertificateError::DegreeMismatch {
            expected: 2,
            got: chain.degree(),
        });
    }
    let v = chain.evaluate(x)?;
    Ok(Complex64::new(v.lf[1], 0.0) + gain * v.lf[0])
}

/// `ψ₁(x) = L_f h(x) + p1·h(x)` with `p1 = (1 - i)/dt`.
pub fn psi1_trace(
    chain: &LieDerivativeChain,
    x: &StateVector,
    dt: f64,
) -> Result<Complex64, CertificateError> {
    psi1_with_gain(chain, x, complex_roots(dt)?.p1)
}
