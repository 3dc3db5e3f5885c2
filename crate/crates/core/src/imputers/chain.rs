//! Chained-equations driver.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;

use crate::data::{Dataset, ImputationRun};
use crate::error::{Error, Result};
use crate::imputers::{assignment_label, impute_column, ImputerConfig, Method};
use crate::rng::{substream, Rng};

/// Substream tag for the marginal draws that seed each copy.
pub const INIT_STREAM: u64 = 0;
/// Substream tag for sweep `s`, variable `j`: path `[copy, SWEEP_STREAM, s, j]`.
pub const SWEEP_STREAM: u64 = 1;

/// Which method imputes which variable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MethodAssignment {
    /// Fallback for variables without an override.
    pub default: Option<Method>,
    pub overrides: BTreeMap<String, Method>,
}

impl MethodAssignment {
    pub fn uniform(method: Method) -> Self {
        MethodAssignment {
            default: Some(method),
            overrides: BTreeMap::new(),
        }
    }

    pub fn method_for(&self, variable: &str) -> Option<Method> {
        self.overrides.get(variable).copied().or(self.default)
    }

    /// Resolve the method of every incomplete variable, checking kinds.
    pub fn resolve(&self, ds: &Dataset) -> Result<BTreeMap<String, Method>> {
        for name in self.overrides.keys() {
            ds.index_of(name)?;
        }
        let mut out = BTreeMap::new();
        for col in ds.incomplete_columns() {
            let spec = ds.spec(col);
            let method = self
                .method_for(&spec.name)
                .ok_or_else(|| Error::UnassignedVariable(spec.name.clone()))?;
            if !method.supports(spec.kind) {
                return Err(Error::MethodKindMismatch {
                    method: method.to_string(),
                    kind: spec.kind.to_string(),
                    variable: spec.name.clone(),
                });
            }
            out.insert(spec.name.clone(), method);
        }
        Ok(out)
    }
}

fn visit_order(ds: &Dataset, cfg: &ImputerConfig) -> Result<Vec<usize>> {
    let incomplete = ds.incomplete_columns();
    match &cfg.visit_order {
        None => Ok(incomplete),
        Some(names) => {
            let mut order = Vec::new();
            for name in names {
                let col = ds.index_of(name)?;
                if incomplete.contains(&col) && !order.contains(&col) {
                    order.push(col);
                }
            }
            // anything not listed follows in schema order
            let rest: Vec<usize> = incomplete.into_iter().filter(|c| !order.contains(c)).collect();
            order.extend(rest);
            Ok(order)
        }
    }
}

fn complete_copy(
    ds: &Dataset,
    order: &[usize],
    methods: &[Method],
    cfg: &ImputerConfig,
    copy: usize,
) -> Result<Dataset> {
    let masks: Vec<Vec<bool>> = order.iter().map(|&c| ds.mask(c).to_vec()).collect();
    let mut current = ds.clone();
    let mut init: Rng = substream(cfg.seed, &[copy as u64, INIT_STREAM]);
    for &col in order {
        let observed: Vec<f64> = (0..ds.nrows())
            .filter_map(|i| ds.get(i, col))
            .collect();
        if observed.is_empty() {
            return Err(Error::InsufficientDonors {
                variable: ds.spec(col).name.clone(),
                available: 0,
                needed: 1,
            });
        }
        let fill: Vec<f64> = (0..ds.nrows())
            .map(|_| observed[init.random_range(0..observed.len())])
            .collect();
        current.fill_missing(col, &fill)?;
    }
    // With one incomplete variable and complete predictors, every pass draws
    // from the same conditional model, so a single pass is exact.
    let sweeps = if order.len() == 1 { 1 } else { cfg.sweeps };
    for sweep in 0..sweeps {
        for (k, &col) in order.iter().enumerate() {
            let mut rng = substream(
                cfg.seed,
                &[copy as u64, SWEEP_STREAM, sweep as u64, col as u64],
            );
            let values = impute_column(&current, col, &masks[k], methods[k], cfg, &mut rng)?;
            current.set_column(col, values);
        }
    }
    Ok(current)
}

/// Complete `ds` `cfg.m` times by chained equations.
///
/// Missing cells start as random draws from their column's observed values;
/// then `cfg.sweeps` passes re-impute each incomplete variable in turn from
/// the current completions of all others. Copies use independent
/// substreams and may run in parallel. Observed cells are never modified.
pub fn mice_chain(ds: &Dataset, methods: &MethodAssignment, cfg: &ImputerConfig) -> Result<ImputationRun> {
    cfg.validate()?;
    let resolved = methods.resolve(ds)?;
    let order = visit_order(ds, cfg)?;
    let per_col: Vec<Method> = order
        .iter()
        .map(|&c| resolved[&ds.spec(c).name])
        .collect();
    let datasets: Vec<Dataset> = (0..cfg.m)
        .into_par_iter()
        .map(|copy| complete_copy(ds, &order, &per_col, cfg, copy))
        .collect::<Result<_>>()?;
    let method = if resolved.is_empty() {
        methods
            .default
            .map_or_else(|| "none".to_string(), |m| m.to_string())
    } else {
        assignment_label(&resolved)
    };
    Ok(ImputationRun {
        method,
        datasets,
        seed: cfg.seed,
        iterations: cfg.sweeps,
    })
}
