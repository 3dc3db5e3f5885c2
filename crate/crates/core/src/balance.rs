//! Stable balancing weights.
//!
//! Finds the minimum-variance weights on the observed rows of a variable
//! whose weighted covariate means land within `delta` of the covariate means
//! of the rows that were imputed:
//!
//! ```text
//!     minimize     sum_i w_i^2
//!     subject to   |w' x_p - target_p| <= delta_p    p = 1..P
//!                  1' w = 1,  w >= 0
//! ```
//!
//! The program is solved in its dual, which has only `P + 1` variables. For
//! multipliers `(nu, y)` the primal minimizer is `w_i = max(0, nu + x_i' y)`,
//! and the dual objective
//!
//! ```text
//!     g(nu, y) = -1/2 |max(0, nu + X y)|^2 + nu + sum_p (target_p y_p - delta_p |y_p|)
//! ```
//!
//! is concave and piecewise quadratic. A projected semismooth Newton method
//! with an active set on the signs of `y` maximizes it; on each face the
//! objective is quadratic, so Newton terminates once the support of `w` and
//! the active constraints settle. Weak duality bounds `g` by `1/2` for any
//! feasible problem, which gives a cheap infeasibility certificate.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{encode_features, Dataset, EncodeOptions, FeatureLabel, FeatureMatrix};
use crate::error::{Error, Result};

/// Tolerance added to `delta` when checking a constraint.
pub const BALANCE_TOL: f64 = 1e-8;

const SD_FLOOR: f64 = 1e-12;

/// Per-column default tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPolicy {
    /// Tolerance for indicator columns.
    pub indicator: f64,
    /// Tolerance for other columns, as a fraction of the observed-group sd.
    pub sd_fraction: f64,
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        DeltaPolicy {
            indicator: 0.0,
            sd_fraction: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BalanceOptions {
    pub encode: EncodeOptions,
    pub delta: DeltaPolicy,
}

/// Observed-group features, imputed-group means and tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceProblem {
    pub variable: String,
    pub features: FeatureMatrix,
    pub targets: Vec<f64>,
    pub delta: Vec<f64>,
}

impl BalanceProblem {
    pub fn new(
        variable: impl Into<String>,
        features: FeatureMatrix,
        targets: Vec<f64>,
        delta: Vec<f64>,
    ) -> Result<Self> {
        let variable = variable.into();
        let fail = |message: String| Error::Balance {
            variable: variable.clone(),
            message,
        };
        if features.nrows() < 2 {
            return Err(fail(format!(
                "{} observed rows, at least 2 required",
                features.nrows()
            )));
        }
        if targets.len() != features.ncols() || delta.len() != features.ncols() {
            return Err(fail("targets/delta length does not match feature count".into()));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(fail("non-finite target".into()));
        }
        if delta.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(fail("delta must be finite and nonnegative".into()));
        }
        if features.data.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite feature value".into()));
        }
        Ok(BalanceProblem {
            variable,
            features,
            targets,
            delta,
        })
    }

    /// Convenience constructor from raw columns (`x[p][i]`).
    pub fn from_columns(columns: &[Vec<f64>], targets: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let data = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        let labels = (0..columns.len())
            .map(|p| FeatureLabel {
                term: crate::data::Term {
                    variable: format!("x{}", p + 1),
                    category: None,
                },
                power: 1,
                partner: None,
                indicator: false,
            })
            .collect();
        let features = FeatureMatrix {
            data,
            labels,
            row_index: (0..n).collect(),
        };
        Self::new("problem", features, targets, delta)
    }

    pub fn n_observed(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_constraints(&self) -> usize {
        self.features.ncols()
    }

    /// Unweighted mean and sample sd of each observed-side column.
    pub fn column_moments(&self) -> Vec<(f64, f64)> {
        self.features
            .data
            .column_iter()
            .map(|c| mean_sd(c.as_slice()))
            .collect()
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Build the balancing problem for `target_var` on a completed dataset.
///
/// `source_mask` is the original missingness of `target_var`: rows where it
/// is `false` carry the weights, rows where it is `true` define the targets.
pub fn build_problem(
    completed: &Dataset,
    target_var: &str,
    source_mask: &[bool],
    options: &BalanceOptions,
) -> Result<BalanceProblem> {
    let fail = |message: String| Error::Balance {
        variable: target_var.to_string(),
        message,
    };
    if source_mask.len() != completed.nrows() {
        return Err(fail("mask length differs from row count".into()));
    }
    let encoded = encode_features(completed, Some(target_var), &options.encode)?;
    let col = completed.index_of(target_var)?;
    if completed.missing_count(col) > 0 {
        return Err(Error::Incomplete(target_var.to_string()));
    }
    let observed: Vec<usize> = (0..source_mask.len()).filter(|&i| !source_mask[i]).collect();
    let imputed: Vec<usize> = (0..source_mask.len()).filter(|&i| source_mask[i]).collect();
    if observed.len() < 2 || imputed.len() < 2 {
        return Err(fail(format!(
            "{} observed and {} imputed rows; both sides need at least 2",
            observed.len(),
            imputed.len()
        )));
    }
    let targets: Vec<f64> = encoded
        .data
        .column_iter()
        .map(|c| imputed.iter().map(|&i| c[i]).sum::<f64>() / imputed.len() as f64)
        .collect();
    let features = encoded.select_rows(&observed);
    let mut delta = Vec::with_capacity(targets.len());
    for (p, column) in features.data.column_iter().enumerate() {
        let label = &features.labels[p];
        let values = column.as_slice();
        let (_, sd) = mean_sd(values);
        let d = if label.indicator {
            options.delta.indicator
        } else {
            options.delta.sd_fraction * sd
        };
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= SD_FLOOR * (1.0 + lo.abs()) && (targets[p] - lo).abs() > d + BALANCE_TOL {
            return Err(Error::StructurallyInfeasible {
                constraint: label.to_string(),
                message: format!(
                    "observed rows are constant at {lo} but the imputed-group mean is {}",
                    targets[p]
                ),
            });
        }
        delta.push(d);
    }
    BalanceProblem::new(target_var, features, targets, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightStatus {
    Optimal,
    Relaxed,
    Infeasible,
}

impl fmt::Display for WeightStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightStatus::Optimal => "optimal",
            WeightStatus::Relaxed => "relaxed",
            WeightStatus::Infeasible => "infeasible",
        })
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    /// `|w - mean(w)|^2`, i.e. `sum w_i^2 - 1/n`.
    pub objective: f64,
    pub status: WeightStatus,
    /// Tolerances the weights satisfy; inflated when `status` is relaxed.
    pub delta: Vec<f64>,
    /// Factor applied to the tolerances (1 unless relaxed).
    pub relaxation: f64,
    /// Multiplier on `1'w = 1` for the objective `1/2 |w|^2`.
    pub nu: f64,
    /// Multipliers on the balance constraints, in the features' own units.
    /// Positive means the lower bound is active, negative the upper bound.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Optimality tolerance on the scaled dual gradient.
    pub tolerance: f64,
    /// Doublings tried before declaring the problem infeasible.
    pub ladder_steps: u32,
    /// Tolerance floor, as a fraction of column sd, for the relaxation ladder.
    pub ladder_floor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 500,
            tolerance: 1e-11,
            ladder_steps: 20,
            ladder_floor: 1e-3,
        }
    }
}

pub fn solve_sbw(problem: &BalanceProblem) -> WeightVector {
    solve_sbw_with(problem, &SolverSettings::default())
}

/// Solve; on infeasibility inflate every tolerance by 2, 4, 8, ... until the
/// program becomes feasible or the ladder runs out.
pub fn solve_sbw_with(problem: &BalanceProblem, settings: &SolverSettings) -> WeightVector {
    let scaled = ScaledProblem::new(problem);
    let (attempt, iterations) = match scaled.solve(&scaled.delta, settings) {
        Outcome::Optimal(s) => return scaled.finish(problem, s, WeightStatus::Optimal, 1.0, None),
        Outcome::Infeasible { worst, iterations } => (worst, iterations),
        Outcome::Stalled { iterations } => {
            return scaled.failed(
                problem,
                iterations,
                "dual iteration did not converge".to_string(),
            )
        }
    };
    let mut worst = attempt;
    let mut total = iterations;
    let base: Vec<f64> = scaled
        .delta
        .iter()
        .map(|&d| d.max(settings.ladder_floor))
        .collect();
    for step in 1..=settings.ladder_steps {
        let factor = f64::powi(2.0, step as i32);
        let relaxed: Vec<f64> = base.iter().map(|d| d * factor).collect();
        match scaled.solve(&relaxed, settings) {
            Outcome::Optimal(mut s) => {
                s.iterations += total;
                s.delta = relaxed;
                let note = format!(
                    "tolerances relaxed by factor {factor} (floor {} sd)",
                    settings.ladder_floor
                );
                return scaled.finish(problem, s, WeightStatus::Relaxed, factor, Some(note));
            }
            Outcome::Infeasible { worst: w, iterations } => {
                worst = w;
                total += iterations;
            }
            Outcome::Stalled { iterations } => total += iterations,
        }
    }
    let label = &problem.features.labels[worst];
    scaled.failed(
        problem,
        total,
        format!(
            "infeasible after {} relaxation steps; worst constraint `{label}`",
            settings.ladder_steps
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    /// delta_p = 0: equality, multiplier unrestricted.
    Free,
    /// Multiplier fixed at zero.
    Zero,
    /// Lower bound active, multiplier > 0.
    Lower,
    /// Upper bound active, multiplier < 0.
    Upper,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Lower => 1.0,
            Side::Upper => -1.0,
            Side::Free | Side::Zero => 0.0,
        }
    }
}

struct DualSolution {
    nu: f64,
    y: Vec<f64>,
    iterations: usize,
    delta: Vec<f64>,
}

enum Outcome {
    Optimal(DualSolution),
    Infeasible { worst: usize, iterations: usize },
    Stalled { iterations: usize },
}

/// Centered, sd-scaled copy of a problem. Because `1'w = 1` holds, shifting
/// a column and its target by the same constant leaves the program unchanged.
struct ScaledProblem {
    x: DMatrix<f64>,
    targets: Vec<f64>,
    delta: Vec<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl ScaledProblem {
    fn new(problem: &BalanceProblem) -> Self {
        let moments = problem.column_moments();
        let center: Vec<f64> = moments.iter().map(|m| m.0).collect();
        let scale: Vec<f64> = moments
            .iter()
            .map(|&(_, sd)| if sd < SD_FLOOR { 1.0 } else { sd })
            .collect();
        let src = &problem.features.data;
        let x = DMatrix::from_fn(src.nrows(), src.ncols(), |i, p| {
            (src[(i, p)] - center[p]) / scale[p]
        });
        let targets = (0..src.ncols())
            .map(|p| (problem.targets[p] - center[p]) / scale[p])
            .collect();
        let delta = (0..src.ncols()).map(|p| problem.delta[p] / scale[p]).collect();
        ScaledProblem {
            x,
            targets,
            delta,
            center,
            scale,
        }
    }

    fn n(&self) -> usize {
        self.x.nrows()
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }

    fn linear(&self, nu: f64, y: &[f64]) -> Vec<f64> {
        let mut u = vec![nu; self.n()];
        for (p, &yp) in y.iter().enumerate() {
            if yp != 0.0 {
                for (ui, xi) in u.iter_mut().zip(self.x.column(p).iter()) {
                    *ui += xi * yp;
                }
            }
        }
        u
    }

    fn dual(&self, nu: f64, y: &[f64], delta: &[f64]) -> f64 {
        let u = self.linear(nu, y);
        let sq: f64 = u.iter().map(|&v| if v > 0.0 { v * v } else { 0.0 }).sum();
        let lin: f64 = y
            .iter()
            .enumerate()
            .map(|(p, &yp)| self.targets[p] * yp - delta[p] * yp.abs())
            .sum();
        -0.5 * sq + nu + lin
    }

    /// `x_p' w - target_p` for every constraint.
    fn slacks(&self, w: &[f64]) -> Vec<f64> {
        (0..self.p())
            .map(|p| {
                self.x
                    .column(p)
                    .iter()
                    .zip(w)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    - self.targets[p]
            })
            .collect()
    }

    fn solve(&self, delta: &[f64], settings: &SolverSettings) -> Outcome {
        let n = self.n();
        let np = self.p();
        let tol = settings.tolerance;
        let mut nu = 1.0 / n as f64;
        let mut y = vec![0.0; np];
        let mut side: Vec<Side> = delta
            .iter()
            .map(|&d| if d == 0.0 { Side::Free } else { Side::Zero })
            .collect();

        for iter in 0..settings.max_iterations {
            let u = self.linear(nu, &y);
            let w: Vec<f64> = u.iter().map(|&v| v.max(0.0)).collect();
            let g = self.dual(nu, &y, delta);
            if g > 0.5 + 1e-9 {
                return Outcome::Infeasible {
                    worst: self.worst_constraint(&w, delta),
                    iterations: iter,
                };
            }
            let slack = self.slacks(&w);
            let active: Vec<usize> = (0..np).filter(|&p| side[p] != Side::Zero).collect();
            let mut grad = Vec::with_capacity(active.len() + 1);
            grad.push(1.0 - w.iter().sum::<f64>());
            for &p in &active {
                grad.push(-slack[p] - delta[p] * side[p].sign());
            }
            let gnorm = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

            if gnorm <= tol {
                // Face optimal; release the most profitable zero multiplier.
                let mut best: Option<(usize, Side, f64)> = None;
                for p in (0..np).filter(|&p| side[p] == Side::Zero) {
                    let up = -slack[p] - delta[p];
                    let down = slack[p] - delta[p];
                    let (s, gain) = if up >= down {
                        (Side::Lower, up)
                    } else {
                        (Side::Upper, down)
                    };
                    if gain > tol && best.is_none_or(|b| gain > b.2) {
                        best = Some((p, s, gain));
                    }
                }
                match best {
                    None => {
                        return Outcome::Optimal(DualSolution {
                            nu,
                            y,
                            iterations: iter,
                            delta: delta.to_vec(),
                        })
                    }
                    Some((p, s, _)) => {
                        side[p] = s;
                        continue;
                    }
                }
            }

            let positive: Vec<usize> = (0..n).filter(|&i| u[i] > 0.0).collect();
            let dim = active.len() + 1;
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            let col = |k: usize, i: usize| -> f64 {
                if k == 0 {
                    1.0
                } else {
                    self.x[(i, active[k - 1])]
                }
            };
            for a in 0..dim {
                for b in a..dim {
                    let v: f64 = positive.iter().map(|&i| col(a, i) * col(b, i)).sum();
                    h[(a, b)] = v;
                    h[(b, a)] = v;
                }
            }
            let trace: f64 = (0..dim).map(|k| h[(k, k)]).sum();
            let mut ridge = 1e-12 * (1.0 + trace / dim as f64);
            let rhs = DVector::from_vec(grad.clone());
            let step = loop {
                let mut hr = h.clone();
                for k in 0..dim {
                    hr[(k, k)] += ridge;
                }
                if let Some(ch) = hr.cholesky() {
                    break ch.solve(&rhs);
                }
                ridge *= 100.0;
            };

            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..64 {
                let new_nu = nu + alpha * step[0];
                let mut new_y = y.clone();
                for (k, &p) in active.iter().enumerate() {
                    let v = y[p] + alpha * step[k + 1];
                    new_y[p] = match side[p] {
                        Side::Lower => v.max(0.0),
                        Side::Upper => v.min(0.0),
                        _ => v,
                    };
                }
                let moved: f64 = grad[0] * (new_nu - nu)
                    + active
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| grad[k + 1] * (new_y[p] - y[p]))
                        .sum::<f64>();
                let new_g = self.dual(new_nu, &new_y, delta);
                if new_g >= g + 1e-4 * moved && new_g >= g {
                    accepted = Some((new_nu, new_y));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((new_nu, new_y)) => {
                    nu = new_nu;
                    for &p in &active {
                        if matches!(side[p], Side::Lower | Side::Upper) && new_y[p] == 0.0 {
                            side[p] = Side::Zero;
                        }
                    }
                    y = new_y;
                }
                None => {
                    // No ascent left at working precision.
                    if gnorm <= tol.sqrt() {
                        return Outcome::Optimal(DualSolution {
                            nu,
                            y,
                            iterations: iter,
                            delta: delta.to_vec(),
                        });
                    }
                    return Outcome::Stalled { iterations: iter };
                }
            }
        }
        Outcome::Stalled {
            iterations: settings.max_iterations,
        }
    }

    fn worst_constraint(&self, w: &[f64], delta: &[f64]) -> usize {
        let total: f64 = w.iter().sum();
        let normalized: Vec<f64> = if total > 0.0 {
            w.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / self.n() as f64; self.n()]
        };
        let slack = self.slacks(&normalized);
        (0..self.p())
            .max_by(|&a, &b| {
                let va = slack[a].abs() - delta[a];
                let vb = slack[b].abs() - delta[b];
                va.total_cmp(&vb)
            })
            .unwrap_or(0)
    }

    fn finish(
        &self,
        problem: &BalanceProblem,
        sol: DualSolution,
        status: WeightStatus,
        relaxation: f64,
        diagnostic: Option<String>,
    ) -> WeightVector {
        let u = self.linear(sol.nu, &sol.y);
        let mut weights: Vec<f64> = u.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let n = weights.len() as f64;
        let objective = (weights.iter().map(|w| w * w).sum::<f64>() - 1.0 / n).max(0.0);
        let multipliers: Vec<f64> = sol
            .y
            .iter()
            .zip(&self.scale)
            .map(|(y, s)| y / s)
            .collect();
        let nu = sol.nu
            - multipliers
                .iter()
                .zip(&self.center)
                .map(|(y, c)| y * c)
                .sum::<f64>();
        let delta = sol
            .delta
            .iter()
            .zip(&self.scale)
            .zip(&problem.delta)
            .map(|((d, s), orig)| if relaxation == 1.0 { *orig } else { d * s })
            .collect();
        WeightVector {
            weights,
            objective,
            status,
            delta,
            relaxation,
            nu,
            multipliers,
            iterations: sol.iterations,
            diagnostic,
        }
    }

    fn failed(&self, problem: &BalanceProblem, iterations: usize, message: String) -> WeightVector {
        let n = self.n();
        WeightVector {
            weights: vec![1.0 / n as f64; n],
            objective: 0.0,
            status: WeightStatus::Infeasible,
            delta: problem.delta.clone(),
            relaxation: f64::INFINITY,
            nu: 0.0,
            multipliers: vec![0.0; self.p()],
            iterations,
            diagnostic: Some(message),
        }
    }
}

/// One row of a balance table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub feature: String,
    pub weighted_mean: f64,
    pub target: f64,
    pub gap: f64,
    pub delta: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTable {
    pub rows: Vec<BalanceRow>,
    pub all_satisfied: bool,
}

impl BalanceTable {
    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).fold(0.0, f64::max)
    }
}

/// Check every constraint at the tolerances stored in `weights`.
pub fn verify_balance(weights: &WeightVector, problem: &BalanceProblem) -> BalanceTable {
    let rows: Vec<BalanceRow> = problem
        .features
        .data
        .column_iter()
        .enumerate()
        .map(|(p, column)| {
            let weighted_mean: f64 = column.iter().zip(&weights.weights).map(|(x, w)| x * w).sum();
            let target = problem.targets[p];
            let gap = (weighted_mean - target).abs();
            let delta = weights.delta[p];
            BalanceRow {
                feature: problem.features.labels[p].to_string(),
                weighted_mean,
                target,
                gap,
                delta,
                satisfied: gap <= delta + BALANCE_TOL,
            }
        })
        .collect();
    let all_satisfied = rows.iter().all(|r| r.satisfied);
    BalanceTable {
        rows,
        all_satisfied,
    }
}

/// Components of the KKT conditions for `minimize 1/2 |w|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `|1'w - 1|` and the most negative weight.
    pub simplex: f64,
    /// Largest constraint violation beyond `delta`, in column-sd units.
    pub balance: f64,
    /// Largest `|w_i - max(0, nu + x_i'y)|` over positive weights and
    /// `max(0, nu + x_i'y)` over zero weights.
    pub stationarity: f64,
    /// Largest multiplier times the slack of its bound; also catches
    /// multipliers of the wrong sign.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.simplex
            .max(self.balance)
            .max(self.stationarity)
            .max(self.complementarity)
    }
}

pub fn kkt_residuals(problem: &BalanceProblem, weights: &WeightVector) -> KktResiduals {
    let w = &weights.weights;
    let sum: f64 = w.iter().sum();
    let min_w = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let simplex = (sum - 1.0).abs().max((-min_w).max(0.0));
    let moments = problem.column_moments();
    let data = &problem.features.data;
    let mut balance: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for p in 0..problem.n_constraints() {
        let scale = if moments[p].1 < SD_FLOOR { 1.0 } else { moments[p].1 };
        let mean: f64 = data.column(p).iter().zip(w).map(|(x, w)| x * w).sum();
        let s = mean - problem.targets[p];
        let d = weights.delta[p];
        balance = balance.max(((s.abs() - d) / scale).max(0.0));
        let y = weights.multipliers[p];
        if d > 0.0 {
            let lower_slack = (s + d).max(0.0);
            let upper_slack = (d - s).max(0.0);
            let r = if y > 0.0 {
                y * lower_slack
            } else {
                -y * upper_slack
            };
            complementarity = complementarity.max(r);
        }
    }
    let mut stationarity: f64 = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        let u = weights.nu
            + (0..problem.n_constraints())
                .map(|p| data[(i, p)] * weights.multipliers[p])
                .sum::<f64>();
        let r = if wi > 0.0 { (wi - u).abs() } else { u.max(0.0) };
        stationarity = stationarity.max(r);
    }
    KktResiduals {
        simplex,
        balance,
        stationarity,
        complementarity,
    }
}

/// Dump features, targets and weights for cross-checking with another solver.
/// The last row holds the targets with an empty weight.
pub fn write_debug_csv<W: Write>(
    problem: &BalanceProblem,
    weights: &WeightVector,
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["row".to_string()];
    header.extend(problem.features.labels.iter().map(|l| l.to_string()));
    header.push("weight".to_string());
    wtr.write_record(&header)?;
    for i in 0..problem.n_observed() {
        let mut rec = vec![problem.features.row_index[i].to_string()];
        rec.extend(problem.features.data.row(i).iter().map(|v| v.to_string()));
        rec.push(weights.weights[i].to_string());
        wtr.write_record(&rec)?;
    }
    let mut rec = vec!["target".to_string()];
    rec.extend(problem.targets.iter().map(|v| v.to_string()));
    rec.push(String::new());
    wtr.write_record(&rec)?;
    wtr.flush().map_err(|source| Error::Io {
        path: "<debug csv>".into(),
        source,
    })?;
    Ok(())
}
