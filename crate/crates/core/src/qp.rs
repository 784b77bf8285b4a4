//! Small dense strictly convex quadratic programs.
//!
//! Solved with the Goldfarb-Idnani dual active-set method: start from the
//! unconstrained minimizer and add violated constraints one at a time (lowest
//! index first), dropping constraints whose multiplier would turn negative.
//! An infinite step length certifies infeasibility.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const ACTIVITY_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 50;
const DEPENDENCE_TOL: f64 = 1e-10;

/// `normal·z + offset ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpRow {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl QpRow {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        self.normal.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }
}

/// `min zᵀHz + linearᵀz` subject to the rows and `lower ≤ z ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub rows: Vec<QpRow>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActiveConstraint {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub point: DVector<f64>,
    pub objective: f64,
    pub active_set: Vec<ActiveConstraint>,
    /// Multipliers matching `active_set`.
    pub multipliers: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("hessian is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("non-finite program data")]
    NonFinite,
    #[error("inconsistent bounds at index {0}")]
    InvertedBounds(usize),
    #[error("iteration limit {0} exceeded")]
    IterationLimit(usize),
}

impl QuadraticProgram {
    /// Program with no rows and no bounds.
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            rows: Vec::new(),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_row(mut self, row: QpRow) -> Self {
        self.rows.push(row);
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        (z.transpose() * &self.hessian * z)[(0, 0)] + self.linear.dot(z)
    }

    fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        if self.hessian.shape() != (n, n) || self.lower.len() != n || self.upper.len() != n {
            return Err(QpError::Dimension(format!(
                "hessian {:?}, linear {n}, bounds {}/{}",
                self.hessian.shape(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if let Some(i) = self.rows.iter().position(|r| r.normal.len() != n) {
            return Err(QpError::Dimension(format!(
                "row {i} has {} coefficients, expected {n}",
                self.rows[i].normal.len()
            )));
        }
        let finite = self.hessian.iter().chain(self.linear.iter()).all(|v| v.is_finite())
            && self
                .rows
                .iter()
                .all(|r| r.offset.is_finite() && r.normal.iter().all(|v| v.is_finite()))
            && self.lower.iter().chain(self.upper.iter()).all(|v| !v.is_nan());
        if !finite {
            return Err(QpError::NonFinite);
        }
        for i in 0..n {
            if self.lower[i] > self.upper[i] {
                return Err(QpError::InvertedBounds(i));
            }
        }
        let sym = (0..n).all(|i| {
            (0..n).all(|j| {
                let (a, b) = (self.hessian[(i, j)], self.hessian[(j, i)]);
                (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
            })
        });
        if !sym {
            return Err(QpError::NotPositiveDefinite);
        }
        Ok(())
    }

    /// Every inequality as `(normal, offset, label)`.
    fn constraints(&self) -> Vec<(DVector<f64>, f64, ActiveConstraint)> {
        let n = self.dim();
        let mut out: Vec<_> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    DVector::from_column_slice(&r.normal),
                    r.offset,
                    ActiveConstraint::Row(i),
                )
            })
            .collect();
        for i in 0..n {
            if self.lower[i].is_finite() {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                out.push((e, -self.lower[i], ActiveConstraint::Lower(i)));
            }
            if self.upper[i].is_finite() {
                let mut e = DVector::zeros(n);
                e[i] = -1.0;
                out.push((e, self.upper[i], ActiveConstraint::Upper(i)));
            }
        }
        out
    }
}

fn violation_tol(normal: &DVector<f64>, offset: f64, z: &DVector<f64>) -> f64 {
    let scale = 1.0 + offset.abs() + normal.iter().zip(z.iter()).map(|(a, b)| (a * b).abs()).sum::<f64>();
    ACTIVITY_TOL * scale
}

/// Solves the program.
pub fn solve(qp: &QuadraticProgram) -> Result<QpSolution, QpError> {
    qp.validate()?;
    let g = &qp.hessian * 2.0;
    let chol = g.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let ginv = chol.inverse();
    let cons = qp.constraints();

    let mut z = -(&ginv * &qp.linear);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let finish = |z: DVector<f64>, active: &[usize], mult: &[f64], status, iterations| {
        let mut pairs: Vec<(ActiveConstraint, f64)> =
            active.iter().zip(mult).map(|(&i, &m)| (cons[i].2, m)).collect();
        pairs.sort_by_key(|p| index_of(p.0));
        QpSolution {
            objective: qp.objective(&z),
            point: z,
            active_set: pairs.iter().map(|p| p.0).collect(),
            multipliers: pairs.iter().map(|p| p.1).collect(),
            status,
            iterations,
        }
    };

    loop {
        let entering = cons.iter().enumerate().position(|(i, (nrm, off, _))| {
            !active.contains(&i) && nrm.dot(&z) + off < -violation_tol(nrm, *off, &z)
        });
        let Some(p) = entering else {
            return Ok(finish(z, &active, &mult, QpStatus::Optimal, iterations));
        };
        let np = &cons[p].0;
        let mut lambda_p = 0.0;

        loop {
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                return Err(QpError::IterationLimit(MAX_ITERATIONS));
            }
            let ginv_np = &ginv * np;
            let (step, r) = if active.is_empty() {
                (ginv_np.clone(), DVector::zeros(0))
            } else {
                let nmat = DMatrix::from_columns(
                    &active.iter().map(|&i| cons[i].0.clone()).collect::<Vec<_>>(),
                );
                let reduced = nmat.transpose() * &ginv * &nmat;
                let rhs = nmat.transpose() * &ginv_np;
                let r = reduced
                    .lu()
                    .solve(&rhs)
                    .ok_or(QpError::NotPositiveDefinite)?;
                (&ginv_np - &ginv * (&nmat * &r), r)
            };

            // np is (numerically) spanned by the active normals
            let curvature = step.dot(np);
            let dependent = active.len() >= qp.dim()
                || step.norm() <= DEPENDENCE_TOL * ginv_np.norm()
                || curvature <= DEPENDENCE_TOL * ginv_np.dot(np);
            let t_full = if dependent {
                f64::INFINITY
            } else {
                -(np.dot(&z) + cons[p].1) / curvature
            };
            let mut t_partial = f64::INFINITY;
            let mut blocking = None;
            for (k, rk) in r.iter().enumerate() {
                if *rk > 0.0 {
                    let t = mult[k] / rk;
                    if t < t_partial {
                        t_partial = t;
                        blocking = Some(k);
                    }
                }
            }

            if t_full.is_infinite() && t_partial.is_infinite() {
                return Ok(finish(z, &active, &mult, QpStatus::Infeasible, iterations));
            }
            let t = t_full.min(t_partial);
            if t_full.is_finite() {
                z += &step * t;
            }
            for (k, rk) in r.iter().enumerate() {
                mult[k] -= t * rk;
            }
            lambda_p += t;

            if t_full <= t_partial {
                active.push(p);
                mult.push(lambda_p);
                break;
            }
            let k = blocking.expect("finite partial step has a blocking constraint");
            active.remove(k);
            mult.remove(k);
        }
    }
}

fn index_of(c: ActiveConstraint) -> (usize, usize) {
    match c {
        ActiveConstraint::Row(i) => (0, i),
        ActiveConstraint::Lower(i) => (1, i),
        ActiveConstraint::Upper(i) => (2, i),
    }
}

/// Largest of the stationarity, primal, dual and complementarity residuals.
///
/// Multipliers for constraints outside `active_set` are taken as zero.
pub fn kkt_residual(qp: &QuadraticProgram, sol: &QpSolution) -> f64 {
    let z = &sol.point;
    let mut grad = &qp.hessian * z * 2.0 + &qp.linear;
    let mut worst = 0.0_f64;
    for (nrm, off, label) in qp.constraints() {
        let s = nrm.dot(z) + off;
        worst = worst.max(-s);
        let lambda = sol
            .active_set
            .iter()
            .position(|c| *c == label)
            .map(|k| sol.multipliers[k])
            .unwrap_or(0.0);
        worst = worst.max(-lambda);
        worst = worst.max((lambda * s).abs());
        grad -= nrm * lambda;
    }
    worst.max(grad.amax())
}
