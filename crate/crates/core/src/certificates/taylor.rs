use serde::{Deserialize, Serialize};

use super::CertificateError;

/// Location of the Lagrange mean-value point `ξ` on the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiEstimate {
    /// The residual vanishes everywhere, so every `ξ` in the interval works.
    Any,
    /// The residual changes sign between `lo` and `hi`; `estimate` is the
    /// linear-interpolation root.
    Bracket { lo: f64, hi: f64, estimate: f64 },
    /// No sign change was found on the grid.
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub order: usize,
    pub t0: f64,
    pub t: f64,
    /// `h(t)`.
    pub lhs: f64,
    /// `Σ_{k<m} h⁽ᵏ⁾(t0)(t - t0)ᵏ/k!`.
    pub rhs_series_part: f64,
    /// `∫ h⁽ᵐ⁾(τ)(t - τ)^{m-1}/(m-1)! dτ`.
    pub remainder_estimate: f64,
    /// `|lhs - series - remainder|`.
    pub residual: f64,
    pub xi: XiEstimate,
}

/// Finite-difference weights for derivatives `0..=order` at `z` from nodes `x`.
///
/// Returns `w[d][j]`, the weight of node `j` for derivative `d`.
pub(crate) fn fornberg_weights(z: f64, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// `d`-th derivative at sample `i`, from a stencil of `width` neighbours kept
/// inside the grid (centred where possible).
fn derivative_at(times: &[f64], values: &[f64], i: usize, d: usize, width: usize) -> f64 {
    let n = times.len();
    let width = width.min(n);
    let start = i.saturating_sub(width / 2).min(n - width);
    let nodes = &times[start..start + width];
    let w = fornberg_weights(times[i], nodes, d);
    w[d].iter()
        .zip(&values[start..start + width])
        .map(|(w, v)| w * v)
        .sum()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Checks `h(t) = Σ_{k<m} h⁽ᵏ⁾(t0)(t-t0)ᵏ/k! + R_m(t)` on sampled data, with
/// `R_m` in integral form, and brackets the Lagrange point `ξ`.
///
/// `times` must be uniformly spaced; `t0 = times[0]` and `t = times[last]`.
pub fn verify_taylor_identity(
    times: &[f64],
    values: &[f64],
    m: usize,
) -> Result<TaylorReport, CertificateError> {
    if m == 0 {
        return Err(CertificateError::InvalidDegree(m));
    }
    if times.len() != values.len() {
        return Err(CertificateError::InvalidArgument(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let n = times.len();
    if n < m + 2 {
        return Err(CertificateError::TooFewSamples {
            needed: m + 2,
            got: n,
        });
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(CertificateError::InvalidArgument(
            "samples must be finite".into(),
        ));
    }
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(step > 0.0) {
        return Err(CertificateError::NonUniformGrid);
    }
    let tol = 1e-6 * step;
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - step).abs() > tol)
    {
        return Err(CertificateError::NonUniformGrid);
    }

    let t0 = times[0];
    let t = times[n - 1];
    let span = t - t0;
    let width = m + 3;

    let mut series = values[0];
    for k in 1..m {
        series += derivative_at(times, values, 0, k, width) * span.powi(k as i32) / factorial(k);
    }

    let dm: Vec<f64> = (0..n)
        .map(|i| derivative_at(times, values, i, m, width))
        .collect();
    let kernel = |tau: f64| (t - tau).powi(m as i32 - 1) / factorial(m - 1);
    let integrand: Vec<f64> = times.iter().zip(&dm).map(|(tau, d)| d * kernel(*tau)).collect();
    let remainder = step
        * (integrand.iter().sum::<f64>() - 0.5 * (integrand[0] + integrand[n - 1]));

    let lhs = values[n - 1];
    let residual = (lhs - series - remainder).abs();

    let lagrange = span.powi(m as i32) / factorial(m);
    let g: Vec<f64> = dm.iter().map(|d| d * lagrange - remainder).collect();
    let scale = dm
        .iter()
        .map(|d| (d * lagrange).abs())
        .fold(remainder.abs(), f64::max)
        .max(f64::MIN_POSITIVE);
    let xi = if g.iter().all(|v| v.abs() <= 1e-7 * scale) {
        XiEstimate::Any
    } else {
        bracket_root(times, &g, 1e-7 * scale)
    };

    Ok(TaylorReport {
        order: m,
        t0,
        t,
        lhs,
        rhs_series_part: series,
        remainder_estimate: remainder,
        residual,
        xi,
    })
}

fn bracket_root(times: &[f64], g: &[f64], zero_tol: f64) -> XiEstimate {
    let n = times.len();
    for i in 1..n - 1 {
        if g[i].abs() <= zero_tol {
            return XiEstimate::Bracket {
                lo: times[i - 1],
                hi: times[i + 1],
                estimate: times[i],
            };
        }
    }
    for i in 0..n - 1 {
        let (a, b) = (g[i], g[i + 1]);
        if a.signum() != b.signum() && a != 0.0 && b != 0.0 {
            let estimate = times[i] + (times[i + 1] - times[i]) * a / (a - b);
            return XiEstimate::Bracket {
                lo: times[i],
                hi: times[i + 1],
                estimate,
            };
        }
    }
    XiEstimate::NotFound
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t0: f64, t1: f64) -> Vec<f64> {
        (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn square_has_exact_remainder() {
        let t = grid(1001, 0.0, 1.0);
        let h: Vec<f64> = t.iter().map(|t| t * t).collect();
        let r = verify_taylor_identity(&t, &h, 2).unwrap();
        assert!(r.rhs_series_part.abs() < 1e-8);
        assert!((r.remainder_estimate - 1.0).abs() < 1e-6);
        assert!(r.residual < 1e-6);
        assert_eq!(r.xi, XiEstimate::Any);
    }

    #[test]
    fn cube_brackets_one_third() {
        let t = grid(1001, 0.0, 1.0);
        let h: Vec<f64> = t.iter().map(|t| t * t * t).collect();
        let r = verify_taylor_identity(&t, &h, 2).unwrap();
        assert!(r.residual < 1e-6);
        match r.xi {
            XiEstimate::Bracket { lo, hi, estimate } => {
                assert!(lo <= 1.0 / 3.0 + 1e-3 && hi >= 1.0 / 3.0 - 1e-3);
                assert!((estimate - 1.0 / 3.0).abs() <= 1e-3);
            }
            other => panic!("expected a bracket, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let t = vec![0.0, 0.1, 0.3, 0.4];
        assert_eq!(
            verify_taylor_identity(&t, &[0.0; 4], 2),
            Err(CertificateError::NonUniformGrid)
        );
        assert!(matches!(
            verify_taylor_identity(&[0.0, 0.1, 0.2], &[0.0; 3], 2),
            Err(CertificateError::TooFewSamples { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn residual_shrinks_with_refinement() {
        let f = |t: f64| (2.0 * t).sin() + 0.3 * t.exp();
        let mut last = f64::INFINITY;
        for n in [11, 21, 41, 81] {
            let t = grid(n, 0.0, 1.0);
            let h: Vec<f64> = t.iter().map(|t| f(*t)).collect();
            let r = verify_taylor_identity(&t, &h, 2).unwrap();
            assert!(r.residual < last / 2.0, "n={n}: {} vs {last}", r.residual);
            last = r.residual;
        }
    }
}
