//! Per-variable diagnostic over completed datasets.
//!
//! For every variable with enough imputed cells: balance the other variables
//! between its observed and imputed rows, then compare the weighted observed
//! values against the imputed values.

use rayon::prelude::*;

use crate::balance::{
    build_problem, solve_sbw_with, verify_balance, BalanceOptions, BalanceProblem, BalanceTable,
    SolverSettings, WeightStatus, WeightVector,
};
use crate::data::Dataset;
use crate::discrepancy::{discrepancy_suite, DiscrepancyRecord, SuiteOptions, WeightedSample};
use crate::error::{Error, Result};

/// `left:right` interaction request; either side may be `*` for "every
/// other variable".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSpec {
    pub left: String,
    pub right: String,
}

impl std::str::FromStr for InteractionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((l, r)) if !l.is_empty() && !r.is_empty() => Ok(InteractionSpec {
                left: l.to_string(),
                right: r.to_string(),
            }),
            _ => Err(Error::InvalidArgument(format!(
                "interaction `{s}` is not of the form a:b"
            ))),
        }
    }
}

/// Concrete variable pairs for diagnosing `target`; pairs touching the
/// target are left out.
pub fn expand_interactions(
    specs: &[InteractionSpec],
    ds: &Dataset,
    target: &str,
) -> Result<Vec<(String, String)>> {
    let names: Vec<&str> = ds.schema().columns.iter().map(|c| c.name.as_str()).collect();
    let side = |s: &str| -> Result<Vec<String>> {
        if s == "*" {
            Ok(names.iter().map(|n| n.to_string()).collect())
        } else {
            ds.index_of(s)?;
            Ok(vec![s.to_string()])
        }
    };
    let mut out: Vec<(String, String)> = Vec::new();
    for spec in specs {
        for a in side(&spec.left)? {
            for b in side(&spec.right)? {
                if a == b || a == target || b == target {
                    continue;
                }
                let dup = out
                    .iter()
                    .any(|(x, y)| (x == &a && y == &b) || (x == &b && y == &a));
                if !dup {
                    out.push((a.clone(), b));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseOptions {
    pub balance: BalanceOptions,
    pub interactions: Vec<InteractionSpec>,
    /// Variables with fewer imputed cells are skipped.
    pub min_missing: usize,
    pub solver: SolverSettings,
    pub suite: SuiteOptions,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            balance: BalanceOptions::default(),
            interactions: Vec::new(),
            min_missing: 25,
            solver: SolverSettings::default(),
            suite: SuiteOptions::default(),
        }
    }
}

/// Balance outcome for one (variable, method, imputation).
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub variable: String,
    pub method: String,
    pub imputation_index: usize,
    pub status: WeightStatus,
    pub relaxation: f64,
    pub objective: f64,
    pub table: BalanceTable,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub variable: String,
    pub method: String,
    pub imputation_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnosis {
    pub records: Vec<DiscrepancyRecord>,
    pub balance: Vec<BalanceReport>,
    pub failures: Vec<Failure>,
    /// Incomplete variables below the threshold, with their missing count.
    pub skipped: Vec<(String, usize)>,
    pub diagnosed: Vec<String>,
}

/// Completed datasets from one imputation setup.
#[derive(Debug, Clone)]
pub struct CompletedRun {
    pub method: String,
    pub datasets: Vec<Dataset>,
}

/// Check that `completed` fills in `original` without touching it.
pub fn check_completion(original: &Dataset, completed: &Dataset) -> Result<()> {
    if completed.schema() != original.schema() || completed.nrows() != original.nrows() {
        return Err(Error::InvalidArgument(
            "completed dataset does not match the original schema or row count".into(),
        ));
    }
    for col in 0..original.ncols() {
        if completed.missing_count(col) > 0 {
            return Err(Error::Incomplete(original.spec(col).name.clone()));
        }
        for row in 0..original.nrows() {
            if let Some(v) = original.get(row, col) {
                if completed.values(col)[row].to_bits() != v.to_bits() {
                    return Err(Error::TypeViolation {
                        row: row + 1,
                        column: original.spec(col).name.clone(),
                        message: "completed dataset changes an observed cell".into(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Weights and problem for one variable of one completed dataset.
pub fn balance_variable(
    original: &Dataset,
    completed: &Dataset,
    variable: &str,
    options: &DiagnoseOptions,
) -> Result<(BalanceProblem, WeightVector)> {
    let col = original.index_of(variable)?;
    let mut balance = options.balance.clone();
    balance
        .encode
        .interactions
        .extend(expand_interactions(&options.interactions, original, variable)?);
    let problem = build_problem(completed, variable, original.mask(col), &balance)?;
    let weights = solve_sbw_with(&problem, &options.solver);
    Ok((problem, weights))
}

/// Balance, verify and score one variable of one completed dataset.
pub fn diagnose_variable(
    original: &Dataset,
    completed: &Dataset,
    variable: &str,
    method: &str,
    imputation_index: usize,
    options: &DiagnoseOptions,
) -> Result<(Vec<DiscrepancyRecord>, BalanceReport)> {
    let col = original.index_of(variable)?;
    let (problem, weights) = balance_variable(original, completed, variable, options)?;
    let table = verify_balance(&weights, &problem);
    let report = BalanceReport {
        variable: variable.to_string(),
        method: method.to_string(),
        imputation_index,
        status: weights.status,
        relaxation: weights.relaxation,
        objective: weights.objective,
        table,
        diagnostic: weights.diagnostic.clone(),
    };
    if weights.status == WeightStatus::Infeasible {
        return Err(Error::Balance {
            variable: variable.to_string(),
            message: weights
                .diagnostic
                .unwrap_or_else(|| "infeasible balance".to_string()),
        });
    }
    let values = completed.values(col);
    let observed_values: Vec<f64> = problem.features.row_index.iter().map(|&i| values[i]).collect();
    let observed = WeightedSample::new(observed_values, weights.weights.clone())?;
    let imputed_values: Vec<f64> = (0..original.nrows())
        .filter(|&i| original.mask(col)[i])
        .map(|i| values[i])
        .collect();
    let imputed = WeightedSample::uniform(imputed_values)?;
    let records = discrepancy_suite(
        &observed,
        &imputed,
        original.spec(col),
        method,
        imputation_index,
        options.suite,
    )?;
    Ok((records, report))
}

/// Run the diagnostic for every eligible variable of every completed
/// dataset. Failures are collected per variable; the run continues.
pub fn diagnose(original: &Dataset, runs: &[CompletedRun], options: &DiagnoseOptions) -> Result<Diagnosis> {
    let mut diagnosis = Diagnosis::default();
    for run in runs {
        for ds in &run.datasets {
            check_completion(original, ds)?;
        }
    }
    let mut targets = Vec::new();
    for col in 0..original.ncols() {
        let missing = original.missing_count(col);
        if missing == 0 {
            continue;
        }
        let name = original.spec(col).name.clone();
        if missing < options.min_missing {
            diagnosis.skipped.push((name, missing));
        } else {
            targets.push(name);
        }
    }
    let jobs: Vec<(usize, usize, &str)> = runs
        .iter()
        .enumerate()
        .flat_map(|(r, run)| {
            let targets = &targets;
            (0..run.datasets.len())
                .flat_map(move |k| targets.iter().map(move |t| (r, k, t.as_str())))
        })
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(r, k, var)| {
            let run = &runs[r];
            diagnose_variable(original, &run.datasets[k], var, &run.method, k + 1, options)
        })
        .collect();
    for (&(r, k, var), result) in jobs.iter().zip(results) {
        match result {
            Ok((records, report)) => {
                diagnosis.records.extend(records);
                diagnosis.balance.push(report);
            }
            Err(e) => diagnosis.failures.push(Failure {
                variable: var.to_string(),
                method: runs[r].method.clone(),
                imputation_index: k + 1,
                message: e.to_string(),
            }),
        }
    }
    diagnosis.diagnosed = targets;
    Ok(diagnosis)
}
