use std::fmt;
use std::sync::Arc;

use crate::dynamics::StateVector;

use super::CertificateError;

/// Values of a Lie-derivative chain at one state.
///
/// `lf[k]` is `L_f^k h(x)` for `k = 0..=m` (so `lf[0] = h(x)`), and `lglf[j]`
/// is the `j`-th component of `L_g L_f^{m-1} h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainValues {
    pub lf: Vec<f64>,
    pub lglf: Vec<f64>,
}

pub type ChainFn = Arc<dyn Fn(&StateVector) -> ChainValues + Send + Sync>;

/// Closed-form Lie derivatives of one scalar function of known relative degree.
#[derive(Clone)]
pub struct LieDerivativeChain {
    name: String,
    degree: usize,
    inputs: usize,
    eval: ChainFn,
}

impl fmt::Debug for LieDerivativeChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LieDerivativeChain")
            .field("name", &self.name)
            .field("degree", &self.degree)
            .field("inputs", &self.inputs)
            .finish_non_exhaustive()
    }
}

impl LieDerivativeChain {
    pub fn new(
        name: impl Into<String>,
        degree: usize,
        inputs: usize,
        eval: ChainFn,
    ) -> Result<Self, CertificateError> {
        if degree == 0 {
            return Err(CertificateError::InvalidDegree(degree));
        }
        Ok(Self {
            name: name.into(),
            degree,
            inputs,
            eval,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Relative degree `m`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_dim(&self) -> usize {
        self.inputs
    }

    /// Evaluates the chain, checking shapes and finiteness.
    pub fn evaluate(&self, x: &StateVector) -> Result<ChainValues, CertificateError> {
        let v = (self.eval)(x);
        if v.lf.len() != self.degree + 1 {
            return Err(CertificateError::Shape {
                chain: self.name.clone(),
                what: "lf",
                expected: self.degree + 1,
                got: v.lf.len(),
            });
        }
        if v.lglf.len() != self.inputs {
            return Err(CertificateError::Shape {
                chain: self.name.clone(),
                what: "lglf",
                expected: self.inputs,
                got: v.lglf.len(),
            });
        }
        if v.lf.iter().chain(v.lglf.iter()).any(|a| !a.is_finite()) {
            return Err(CertificateError::NonFinite {
                chain: self.name.clone(),
                state: x.iter().copied().collect(),
            });
        }
        Ok(v)
    }

    /// `h(x)`.
    pub fn value(&self, x: &StateVector) -> Result<f64, CertificateError> {
        self.evaluate(x).map(|v| v.lf[0])
    }

    /// A chain whose every evaluator is post-processed by `f`.
    pub fn map(
        &self,
        name: impl Into<String>,
        f: impl Fn(ChainValues) -> ChainValues + Send + Sync + 'static,
    ) -> Self {
        let inner = self.eval.clone();
        Self {
            name: name.into(),
            degree: self.degree,
            inputs: self.inputs,
            eval: Arc::new(move |x| f(inner(x))),
        }
    }

    /// The chain of `λ·h`.
    pub fn scaled(&self, lambda: f64) -> Self {
        self.map(format!("{}*{lambda}", self.name), move |mut v| {
            v.lf.iter_mut().for_each(|a| *a *= lambda);
            v.lglf.iter_mut().for_each(|a| *a *= lambda);
            v
        })
    }

    /// Whether `L_g L_f^{m-1} h` vanishes at `x` (the relative-degree assumption
    /// fails there).
    pub fn input_gain_vanishes(&self, x: &StateVector) -> Result<bool, CertificateError> {
        Ok(self.evaluate(x)?.lglf.iter().all(|a| *a == 0.0))
    }
}
