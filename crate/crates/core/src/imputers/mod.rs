//! Univariate multiple-imputation methods and the chained-equations driver.
//!
//! Each univariate imputer completes one column given fully observed
//! predictors. Donor-based methods (PMM, hot-deck, random forest) copy an
//! observed value from a donor row, so imputations always come from the
//! observed-value set. The normal model draws from a Bayesian linear
//! regression posterior.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{encode_features, ColumnKind, Dataset, EncodeOptions, FeatureMatrix, IndicatorCoding};
use crate::error::{Error, Result};
use crate::rng::Rng;

mod chain;
mod forest;
mod hotdeck;
mod linear;
mod norm;
mod pmm;

pub use chain::{mice_chain, MethodAssignment, INIT_STREAM, SWEEP_STREAM};
pub use forest::{RegressionTree, TreeParams};
pub use linear::{fit_linear, RegressionFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pmm,
    Hotdeck,
    Norm,
    Rforest,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pmm, Method::Hotdeck, Method::Norm, Method::Rforest];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pmm => "pmm",
            Method::Hotdeck => "hotdeck",
            Method::Norm => "norm",
            Method::Rforest => "rforest",
        }
    }

    /// Donor methods copy observed values.
    pub fn is_donor(self) -> bool {
        !matches!(self, Method::Norm)
    }

    pub fn supports(self, kind: ColumnKind) -> bool {
        self.is_donor() || kind != ColumnKind::Categorical
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerConfig {
    pub method: Method,
    /// Donor pool size for PMM and hot-deck.
    pub donors: usize,
    pub trees: usize,
    /// Smallest leaf in random-forest trees.
    pub min_leaf: usize,
    /// Number of completed copies.
    pub m: usize,
    /// Chained-equation passes.
    pub sweeps: usize,
    pub seed: u64,
    /// Chained-equation visit order; schema order when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visit_order: Option<Vec<String>>,
}

impl Default for ImputerConfig {
    fn default() -> Self {
        ImputerConfig {
            method: Method::Pmm,
            donors: 5,
            trees: 10,
            min_leaf: 5,
            m: 5,
            sweeps: 5,
            seed: 0,
            visit_order: None,
        }
    }
}

impl ImputerConfig {
    pub fn with_method(method: Method) -> Self {
        ImputerConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("{what} must be at least 1")));
        if self.donors < 1 {
            return bad("donors");
        }
        if self.trees < 1 {
            return bad("trees");
        }
        if self.min_leaf < 1 {
            return bad("min_leaf");
        }
        if self.m < 1 {
            return bad("m");
        }
        if self.sweeps < 1 {
            return bad("sweeps");
        }
        Ok(())
    }
}

/// Everything a univariate imputer needs about its target column.
pub(crate) struct Target<'a> {
    pub name: &'a str,
    pub kind: ColumnKind,
    pub n_categories: usize,
    /// Stored values; only entries with `missing[i] == false` are read.
    pub values: &'a [f64],
    pub missing: &'a [bool],
    pub predictors: FeatureMatrix,
}

impl Target<'_> {
    pub fn observed_rows(&self) -> Vec<usize> {
        (0..self.missing.len()).filter(|&i| !self.missing[i]).collect()
    }

    pub fn missing_rows(&self) -> Vec<usize> {
        (0..self.missing.len()).filter(|&i| self.missing[i]).collect()
    }

    pub fn require_donors(&self, needed: usize) -> Result<()> {
        let available = self.missing.iter().filter(|&&m| !m).count();
        if available < needed {
            return Err(Error::InsufficientDonors {
                variable: self.name.to_string(),
                available,
                needed,
            });
        }
        Ok(())
    }
}

fn target<'a>(ds: &'a Dataset, col: usize, missing: &'a [bool]) -> Result<Target<'a>> {
    let spec = ds.spec(col);
    let predictors = encode_features(
        ds,
        Some(&spec.name),
        &EncodeOptions {
            moments: 1,
            interactions: Vec::new(),
            coding: IndicatorCoding::DropReference,
        },
    )?;
    Ok(Target {
        name: &spec.name,
        kind: spec.kind,
        n_categories: spec.categories.len(),
        values: ds.values(col),
        missing,
        predictors,
    })
}

/// Complete column `col`, treating rows flagged in `missing` as unknown.
/// Other columns must be complete; the target's own stored values are read
/// only on non-missing rows. Returns the full column.
pub fn impute_column(
    ds: &Dataset,
    col: usize,
    missing: &[bool],
    method: Method,
    cfg: &ImputerConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let spec = ds.spec(col);
    if !method.supports(spec.kind) {
        return Err(Error::MethodKindMismatch {
            method: method.to_string(),
            kind: spec.kind.to_string(),
            variable: spec.name.clone(),
        });
    }
    if missing.len() != ds.nrows() {
        return Err(Error::InvalidArgument("mask length differs from row count".into()));
    }
    let mut out = ds.values(col).to_vec();
    if !missing.iter().any(|&m| m) {
        return Ok(out);
    }
    let t = target(ds, col, missing)?;
    let fills = match method {
        Method::Pmm => pmm::impute(&t, cfg, rng)?,
        Method::Hotdeck => hotdeck::impute(&t, cfg, rng)?,
        Method::Norm => norm::impute(&t, rng)?,
        Method::Rforest => forest::impute(&t, cfg, rng)?,
    };
    for (row, v) in t.missing_rows().into_iter().zip(fills) {
        out[row] = v;
    }
    Ok(out)
}

fn impute_named(
    ds: &Dataset,
    target: &str,
    method: Method,
    cfg: &ImputerConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let col = ds.index_of(target)?;
    impute_column(ds, col, ds.mask(col), method, cfg, rng)
}

/// Predictive mean matching.
pub fn impute_pmm(ds: &Dataset, target: &str, cfg: &ImputerConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    impute_named(ds, target, Method::Pmm, cfg, rng)
}

/// Random hot-deck on Mahalanobis distance.
pub fn impute_hotdeck(
    ds: &Dataset,
    target: &str,
    cfg: &ImputerConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    impute_named(ds, target, Method::Hotdeck, cfg, rng)
}

/// Bayesian normal linear model.
pub fn impute_norm(ds: &Dataset, target: &str, cfg: &ImputerConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    impute_named(ds, target, Method::Norm, cfg, rng)
}

/// Random-forest donor imputation.
pub fn impute_rforest(
    ds: &Dataset,
    target: &str,
    cfg: &ImputerConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    impute_named(ds, target, Method::Rforest, cfg, rng)
}

/// Indices of the `k` smallest distances (ties broken at random), then one
/// of them drawn uniformly.
pub(crate) fn draw_from_nearest(dist: &[f64], k: usize, rng: &mut Rng) -> usize {
    let pool = nearest(dist, k, rng);
    pool[rng.random_range(0..pool.len())]
}

pub(crate) fn nearest(dist: &[f64], k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut keyed: Vec<(f64, u64, usize)> = dist
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, rng.random::<u64>(), i))
        .collect();
    let k = k.min(keyed.len());
    let cmp = |a: &(f64, u64, usize), b: &(f64, u64, usize)| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    };
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, cmp);
        keyed.truncate(k);
    }
    keyed.sort_by(cmp);
    keyed.into_iter().map(|t| t.2).collect()
}

/// Per-variable method label used in manifests and records.
pub fn assignment_label(assign: &BTreeMap<String, Method>) -> String {
    let mut methods: Vec<Method> = assign.values().cloned().collect();
    methods.sort();
    methods.dedup();
    match methods.as_slice() {
        [] => "none".to_string(),
        [one] => one.to_string(),
        _ => "mixed".to_string(),
    }
}
