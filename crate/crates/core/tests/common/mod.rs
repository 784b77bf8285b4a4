#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tlc_core::qp::{QpRow, QuadraticProgram};

/// Best value, its node, and a per-axis `(min, max)` hull.
type ScanResult = Option<(f64, DVector<f64>, Vec<(f64, f64)>)>;

const BOX: f64 = 3.0;

/// Random convex program with `dim ≤ 2`, `≤ 4` rows and bounds `[-3, 3]`.
pub fn random_program(rng: &mut ChaCha8Rng) -> QuadraticProgram {
    let dim = rng.gen_range(1..=2);
    let l = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let h = &l * l.transpose() + DMatrix::identity(dim, dim) * rng.gen_range(0.1..1.0);
    let lin = DVector::from_fn(dim, |_, _| rng.gen_range(-4.0..4.0));
    let anchor = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
    let mut qp = QuadraticProgram::new(h, lin).with_bounds(
        DVector::from_element(dim, -BOX),
        DVector::from_element(dim, BOX),
    );
    for _ in 0..rng.gen_range(0..=4) {
        let normal: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = DVector::from_vec(normal.clone());
        // mostly feasible at the anchor, occasionally cutting it off
        let offset = -n.dot(&anchor) + rng.gen_range(-0.3..1.5);
        qp = qp.with_row(QpRow::new(normal, offset));
    }
    qp
}

fn feasible(qp: &QuadraticProgram, z: &DVector<f64>) -> bool {
    qp.rows.iter().all(|r| r.value(z) >= 0.0)
        && z.iter().zip(qp.lower.iter().zip(qp.upper.iter())).all(|(v, (l, u))| *v >= *l && *v <= *u)
}

/// Best feasible node of the grid `lo + i·step` inside `[lo, hi]`, together
/// with the bounding box of the feasible nodes whose objective is at most `level`.
fn scan(
    qp: &QuadraticProgram,
    lo: &[f64],
    hi: &[f64],
    step: f64,
    level: f64,
) -> ScanResult {
    let dim = qp.dim();
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let k = ((hi[i] - lo[i]) / step).round() as i64;
            (0..=k).map(|j| (lo[i] + j as f64 * step).min(hi[i])).collect()
        })
        .collect();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut bbox = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
    let mut consider = |z: DVector<f64>| {
        if feasible(qp, &z) {
            let f = qp.objective(&z);
            if f <= level {
                for (b, v) in bbox.iter_mut().zip(z.iter()) {
                    *b = (b.0.min(*v), b.1.max(*v));
                }
            }
            if best.as_ref().is_none_or(|(b, _)| f < *b) {
                best = Some((f, z));
            }
        }
    };
    if dim == 1 {
        for a in &axes[0] {
            consider(DVector::from_vec(vec![*a]));
        }
    } else {
        for a in &axes[0] {
            for b in &axes[1] {
                consider(DVector::from_vec(vec![*a, *b]));
            }
        }
    }
    best.map(|(f, z)| (f, z, bbox))
}

const FINE: f64 = 1e-3;
const FINE_BUDGET: f64 = 4e6;

fn window(at: &DVector<f64>, half: f64, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    at.iter()
        .zip(lo.iter().zip(hi))
        .map(|(z, (l, h))| ((z - half).max(*l), (z + half).min(*h)))
        .unzip()
}

/// Grid minimum at spacing 1e-2 over the bounds; then at 1e-3 over the padded
/// hull of the coarse nodes within 0.1 of the coarse minimum (or around the
/// best coarse node when that hull is too large to sweep); then ever finer
/// windows around the incumbent.
pub fn brute_force(qp: &QuadraticProgram) -> Option<f64> {
    let lo: Vec<f64> = qp.lower.iter().copied().collect();
    let hi: Vec<f64> = qp.upper.iter().copied().collect();
    let (coarse, _, _) = scan(qp, &lo, &hi, 1e-2, f64::INFINITY)?;
    let (_, at, hull) = scan(qp, &lo, &hi, 1e-2, coarse + 0.1)?;
    let pad = 0.1;
    let (flo, fhi): (Vec<f64>, Vec<f64>) = hull
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|((a, b), (l, h))| ((a - pad).max(*l), (b + pad).min(*h)))
        .unzip();
    let nodes: f64 = flo.iter().zip(&fhi).map(|(a, b)| (b - a) / FINE + 1.0).product();
    let fine = if nodes <= FINE_BUDGET {
        scan(qp, &flo, &fhi, FINE, f64::INFINITY)
    } else {
        let (zlo, zhi) = window(&at, 2e-2, &lo, &hi);
        scan(qp, &zlo, &zhi, FINE, f64::INFINITY)
    };
    let (mut best, mut at) = match fine {
        Some((f, z, _)) if f < coarse => (f, z),
        _ => (coarse, at),
    };
    // narrow wedge tips hold no nodes at 1e-3; keep zooming on the incumbent
    for step in [1e-4, 1e-5, 1e-6] {
        let (zlo, zhi) = window(&at, 100.0 * step, &lo, &hi);
        if let Some((f, z, _)) = scan(qp, &zlo, &zhi, step, f64::INFINITY) {
            if f < best {
                (best, at) = (f, z);
            }
        }
    }
    Some(best)
}
