//! Brute-force references for the balancing-weights program
//! `min ||w||^2  s.t.  1'w = 1, w >= 0, |X'w - t| <= delta`.
//!
//! Shared by the core tests and the acceptance suite; keep it free of any
//! dependency on the solver under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Rows are observations, `x[i][p]`.
pub struct Qp {
    pub x: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Qp {
    fn n(&self) -> usize {
        self.x.len()
    }

    fn p(&self) -> usize {
        self.targets.len()
    }

    pub fn feasible(&self, w: &[f64], tol: f64) -> bool {
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > tol || w.iter().any(|&v| v < -tol) {
            return false;
        }
        (0..self.p()).all(|p| {
            let mean: f64 = (0..self.n()).map(|i| w[i] * self.x[i][p]).sum();
            (mean - self.targets[p]).abs() <= self.delta[p] + tol
        })
    }
}

pub fn sum_sq(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}

/// Exact optimum by enumerating faces.
///
/// The optimum has some support `S` and some set of tight band
/// constraints; on that face it is the minimum-norm solution of the
/// resulting equality system. Every (support, tight-set) pair is tried and
/// the best feasible candidate kept. `None` means infeasible.
pub fn face_enumeration(qp: &Qp) -> Option<(Vec<f64>, f64)> {
    let n = qp.n();
    let p = qp.p();
    let mut best: Option<(Vec<f64>, f64)> = None;
    // per-constraint state: 0 loose, 1 at t + delta, 2 at t - delta
    let states = 3usize.pow(p as u32);
    for support in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|i| support >> i & 1 == 1).collect();
        for code in 0..states {
            let mut rows: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; cols.len()], 1.0)];
            let mut c = code;
            let mut redundant = false;
            for q in 0..p {
                let s = c % 3;
                c /= 3;
                if s == 2 && qp.delta[q] == 0.0 {
                    // same equation as state 1
                    redundant = true;
                }
                if s > 0 {
                    let rhs = if s == 1 {
                        qp.targets[q] + qp.delta[q]
                    } else {
                        qp.targets[q] - qp.delta[q]
                    };
                    rows.push((cols.iter().map(|&i| qp.x[i][q]).collect(), rhs));
                }
            }
            if redundant {
                continue;
            }
            let a = DMatrix::from_fn(rows.len(), cols.len(), |r, k| rows[r].0[k]);
            let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
            let pinv = match a.clone().pseudo_inverse(1e-12) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let ws = &pinv * &b;
            if (&a * &ws - &b).amax() > 1e-9 {
                continue;
            }
            let mut w = vec![0.0; n];
            for (k, &i) in cols.iter().enumerate() {
                w[i] = ws[k];
            }
            if !qp.feasible(&w, 1e-9) {
                continue;
            }
            let obj = sum_sq(&w);
            if best.as_ref().is_none_or(|b| obj < b.1) {
                best = Some((w, obj));
            }
        }
    }
    best
}

/// Smallest `sum w^2` over feasible points of the simplex grid with the
/// given step (only sensible for `n <= 3`). `None` if no grid point is
/// feasible.
pub fn simplex_grid(qp: &Qp, step: f64) -> Option<f64> {
    let n = qp.n();
    let k = (1.0 / step).round() as usize;
    let mut best: Option<f64> = None;
    let mut counts = vec![0usize; n];
    fn walk(qp: &Qp, k: usize, pos: usize, left: usize, counts: &mut [usize], best: &mut Option<f64>) {
        let n = counts.len();
        if pos == n - 1 {
            counts[pos] = left;
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
            if qp.feasible(&w, 1e-12) {
                let obj = sum_sq(&w);
                if best.is_none_or(|b| obj < b) {
                    *best = Some(obj);
                }
            }
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            walk(qp, k, pos + 1, left - c, counts, best);
        }
    }
    walk(qp, k, 0, k, &mut counts, &mut best);
    best
}
