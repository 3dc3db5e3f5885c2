//! Weighted two-sample discrepancy statistics.
//!
//! The observed side carries balancing weights, the imputed side uniform
//! weights. Every statistic is zero for identical samples and grows as the
//! two densities drift apart.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, ColumnSpec};
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-10;

/// Values with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sample holds a non-finite value".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightedSample { values, weights })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same weights, values mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> WeightedSample {
        WeightedSample {
            values: self.values.iter().map(|&v| f(v)).collect(),
            weights: self.weights.clone(),
        }
    }

    fn sorted_pairs(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> =
            self.values.iter().cloned().zip(self.weights.iter().cloned()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }
}

pub fn weighted_mean(s: &WeightedSample) -> f64 {
    s.values.iter().zip(&s.weights).map(|(v, w)| v * w).sum()
}

/// Reliability-weighted variance `sum w (v - mu)^2 / (1 - sum w^2)`; with
/// uniform weights this is the usual `n - 1` sample variance.
pub fn weighted_variance(s: &WeightedSample) -> Result<f64> {
    let sum_sq: f64 = s.weights.iter().map(|w| w * w).sum();
    if sum_sq >= 1.0 - 1e-12 {
        return Err(Error::DegenerateVariance);
    }
    let mut support = s
        .values
        .iter()
        .zip(&s.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, _)| *v);
    let first = support.next().ok_or(Error::DegenerateVariance)?;
    if support.all(|v| v == first) {
        return Err(Error::DegenerateVariance);
    }
    let mu = weighted_mean(s);
    let ss: f64 = s
        .values
        .iter()
        .zip(&s.weights)
        .map(|(v, w)| w * (v - mu).powi(2))
        .sum();
    Ok(ss / (1.0 - sum_sq))
}

fn variance_or_zero(s: &WeightedSample) -> Result<Option<f64>> {
    match weighted_variance(s) {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateVariance) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `(mu_imp - mu_obs) / sqrt((var_imp + var_obs) / 2)`; a degenerate side
/// contributes zero variance.
pub fn smd_signed(observed: &WeightedSample, imputed: &WeightedSample) -> Result<f64> {
    let mo = weighted_mean(observed);
    let mi = weighted_mean(imputed);
    let vo = variance_or_zero(observed)?;
    let vi = variance_or_zero(imputed)?;
    if vo.is_none() && vi.is_none() {
        return if mo == mi {
            Ok(0.0)
        } else {
            Err(Error::InfiniteSmd(mo, mi))
        };
    }
    let pooled = ((vo.unwrap_or(0.0) + vi.unwrap_or(0.0)) / 2.0).sqrt();
    Ok((mi - mo) / pooled)
}

pub fn smd(observed: &WeightedSample, imputed: &WeightedSample) -> Result<f64> {
    smd_signed(observed, imputed).map(f64::abs)
}

/// `ln(var_imp / var_obs)`.
pub fn log_vr_signed(observed: &WeightedSample, imputed: &WeightedSample) -> Result<f64> {
    let vo = variance_or_zero(observed)?.ok_or(Error::ZeroVariance)?;
    let vi = variance_or_zero(imputed)?.ok_or(Error::ZeroVariance)?;
    if vo <= 0.0 || vi <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((vi / vo).ln())
}

pub fn log_vr(observed: &WeightedSample, imputed: &WeightedSample) -> Result<f64> {
    log_vr_signed(observed, imputed).map(f64::abs)
}

/// Largest gap between the two weighted empirical CDFs. Both CDFs are
/// right-continuous step functions, compared at every pooled jump point
/// after absorbing all mass at that point.
pub fn ks_weighted(observed: &WeightedSample, imputed: &WeightedSample) -> f64 {
    let a = observed.sorted_pairs();
    let b = imputed.sorted_pairs();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0_f64, 0.0_f64);
    let mut d = 0.0_f64;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].0 == t {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == t {
            fb += b[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d.min(1.0)
}

/// Weighted quantile: smallest value whose cumulative weight reaches `q`.
fn weighted_quantile(sorted: &[(f64, f64)], q: f64) -> f64 {
    let mut acc = 0.0;
    for &(v, w) in sorted {
        acc += w;
        if acc >= q - 1e-12 {
            return v;
        }
    }
    sorted.last().map_or(f64::NAN, |p| p.0)
}

/// Shared bin count for the continuous overlap coefficient:
/// `max(10, Freedman-Diaconis)` on the pooled sample, each side carrying
/// half the mass, capped at the pooled sample size.
pub fn overlap_bins(observed: &WeightedSample, imputed: &WeightedSample) -> usize {
    let mut pooled: Vec<(f64, f64)> = observed
        .values
        .iter()
        .zip(&observed.weights)
        .map(|(&v, &w)| (v, w / 2.0))
        .chain(imputed.values.iter().zip(&imputed.weights).map(|(&v, &w)| (v, w / 2.0)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pooled.len();
    let lo = pooled[0].0;
    let hi = pooled[n - 1].0;
    let iqr = weighted_quantile(&pooled, 0.75) - weighted_quantile(&pooled, 0.25);
    let range = hi - lo;
    if iqr.is_nan() || range.is_nan() || iqr <= 0.0 || range <= 0.0 {
        return 10;
    }
    let width = 2.0 * iqr / (n as f64).cbrt();
    let fd = (range / width).ceil() as usize;
    fd.clamp(10, n.max(10))
}

/// `1 - sum min(p, q)` written as `sum |p - q| / sum (p + q)`, which is the
/// same for unit masses but exact at both ends: identical bins give 0 and
/// disjoint bins give 1, whatever rounding the weight sums carry.
fn one_minus_overlap(bins: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut diff, mut total) = (0.0, 0.0);
    for (p, q) in bins {
        diff += (p - q).abs();
        total += p + q;
    }
    if total > 0.0 {
        (diff / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// One minus the overlap of the two densities. Continuous samples share a
/// histogram over the pooled range; binary and categorical samples use
/// their categories as bins.
pub fn ovl1(observed: &WeightedSample, imputed: &WeightedSample, kind: ColumnKind) -> f64 {
    match kind {
        ColumnKind::Continuous => {
            let bins = overlap_bins(observed, imputed);
            let lo = observed
                .values
                .iter()
                .chain(&imputed.values)
                .cloned()
                .fold(f64::INFINITY, f64::min);
            let hi = observed
                .values
                .iter()
                .chain(&imputed.values)
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            let bin = |v: f64| -> usize {
                if range > 0.0 {
                    (((v - lo) / range * bins as f64) as usize).min(bins - 1)
                } else {
                    0
                }
            };
            let mut po = vec![0.0; bins];
            let mut pi = vec![0.0; bins];
            for (&v, &w) in observed.values.iter().zip(&observed.weights) {
                po[bin(v)] += w;
            }
            for (&v, &w) in imputed.values.iter().zip(&imputed.weights) {
                pi[bin(v)] += w;
            }
            one_minus_overlap(po.into_iter().zip(pi))
        }
        ColumnKind::Binary | ColumnKind::Categorical => {
            let mut mass: Vec<(f64, f64, f64)> = Vec::new();
            let mut add = |v: f64, w: f64, side: usize| {
                let slot = match mass.iter().position(|m| m.0 == v) {
                    Some(k) => k,
                    None => {
                        mass.push((v, 0.0, 0.0));
                        mass.len() - 1
                    }
                };
                if side == 0 {
                    mass[slot].1 += w;
                } else {
                    mass[slot].2 += w;
                }
            };
            for (&v, &w) in observed.values.iter().zip(&observed.weights) {
                add(v, w, 0);
            }
            for (&v, &w) in imputed.values.iter().zip(&imputed.weights) {
                add(v, w, 1);
            }
            one_minus_overlap(mass.into_iter().map(|m| (m.1, m.2)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "SMD")]
    Smd,
    #[serde(rename = "logVR")]
    LogVr,
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "OVL1")]
    Ovl1,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::Smd, Statistic::LogVr, Statistic::Ks, Statistic::Ovl1];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Smd => "SMD",
            Statistic::LogVr => "logVR",
            Statistic::Ks => "KS",
            Statistic::Ovl1 => "OVL1",
        }
    }

    /// Column heading used in printed tables.
    pub fn heading(self) -> &'static str {
        match self {
            Statistic::Smd => "SMD",
            Statistic::LogVr => "log(VR)",
            Statistic::Ks => "KS",
            Statistic::Ovl1 => "1-OVL",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown statistic `{s}`")))
    }
}

/// One statistic for one variable (or category) of one imputed dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRecord {
    pub variable: String,
    pub category: Option<String>,
    pub method: String,
    pub imputation_index: usize,
    pub statistic: Statistic,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Keep the sign of SMD and log(VR) (imputed minus observed).
    pub signed: bool,
}

/// Statistics for one variable: all four for continuous columns, SMD for
/// binary columns, and SMD per category indicator for categorical columns.
pub fn discrepancy_suite(
    observed: &WeightedSample,
    imputed: &WeightedSample,
    spec: &ColumnSpec,
    method: &str,
    imputation_index: usize,
    options: SuiteOptions,
) -> Result<Vec<DiscrepancyRecord>> {
    let record = |category: Option<String>, statistic, value: f64| DiscrepancyRecord {
        variable: spec.name.clone(),
        category,
        method: method.to_string(),
        imputation_index,
        statistic,
        value,
    };
    let smd_fn = if options.signed { smd_signed } else { smd };
    match spec.kind {
        ColumnKind::Continuous => {
            let lvr = if options.signed {
                log_vr_signed(observed, imputed)?
            } else {
                log_vr(observed, imputed)?
            };
            Ok(vec![
                record(None, Statistic::Smd, smd_fn(observed, imputed)?),
                record(None, Statistic::LogVr, lvr),
                record(None, Statistic::Ks, ks_weighted(observed, imputed)),
                record(None, Statistic::Ovl1, ovl1(observed, imputed, spec.kind)),
            ])
        }
        ColumnKind::Binary => Ok(vec![record(None, Statistic::Smd, smd_fn(observed, imputed)?)]),
        ColumnKind::Categorical => spec
            .categories
            .iter()
            .enumerate()
            .map(|(k, label)| {
                let code = k as f64;
                let ind = |v: f64| if v == code { 1.0 } else { 0.0 };
                let value = smd_fn(&observed.map(ind), &imputed.map(ind))?;
                Ok(record(Some(label.clone()), Statistic::Smd, value))
            })
            .collect(),
    }
}

/// How records are grouped before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// One row per (variable, category, method).
    PerVariable,
    /// One row per method, averaging across variables and imputations.
    PerMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupKey {
    pub variable: Option<String>,
    pub category: Option<String>,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: GroupKey,
    /// Mean of each statistic, indexed by [`Statistic::index`].
    pub means: [Option<f64>; 4],
    pub counts: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub grouping: Grouping,
    pub rows: Vec<SummaryRow>,
}

/// Average each statistic within groups. Rows keep first-appearance order.
pub fn pool_records(records: &[DiscrepancyRecord], by: Grouping) -> Result<SummaryTable> {
    if records.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut index: HashMap<GroupKey, usize> = HashMap::new();
    let mut sums: Vec<(GroupKey, [f64; 4], [usize; 4])> = Vec::new();
    for r in records {
        let key = match by {
            Grouping::PerVariable => GroupKey {
                variable: Some(r.variable.clone()),
                category: r.category.clone(),
                method: r.method.clone(),
            },
            Grouping::PerMethod => GroupKey {
                variable: None,
                category: None,
                method: r.method.clone(),
            },
        };
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            sums.push((key, [0.0; 4], [0; 4]));
            sums.len() - 1
        });
        let k = r.statistic.index();
        sums[slot].1[k] += r.value;
        sums[slot].2[k] += 1;
    }
    let rows = sums
        .into_iter()
        .map(|(key, s, c)| {
            let mut means = [None; 4];
            for k in 0..4 {
                if c[k] > 0 {
                    means[k] = Some(s[k] / c[k] as f64);
                }
            }
            SummaryRow {
                key,
                means,
                counts: c,
            }
        })
        .collect();
    Ok(SummaryTable { grouping: by, rows })
}

impl SummaryTable {
    pub fn row(&self, method: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.key.method == method)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::new();
        if self.grouping == Grouping::PerVariable {
            header.extend(["variable", "category"]);
        }
        header.push("method");
        header.extend(Statistic::ALL.iter().map(|s| s.name()));
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = Vec::new();
            if self.grouping == Grouping::PerVariable {
                rec.push(row.key.variable.clone().unwrap_or_default());
                rec.push(row.key.category.clone().unwrap_or_default());
            }
            rec.push(row.key.method.clone());
            rec.extend(
                row.means
                    .iter()
                    .map(|m| m.map_or("NA".to_string(), |v| v.to_string())),
            );
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<summary csv>".into(),
            source,
        })?;
        Ok(())
    }

    /// Fixed-width text rendering with three decimals.
    pub fn to_text(&self) -> String {
        let label = |r: &SummaryRow| -> String {
            match self.grouping {
                Grouping::PerMethod => r.key.method.clone(),
                Grouping::PerVariable => {
                    let var = r.key.variable.clone().unwrap_or_default();
                    match &r.key.category {
                        Some(c) => format!("{var}[{c}] {}", r.key.method),
                        None => format!("{var} {}", r.key.method),
                    }
                }
            }
        };
        let width = self.rows.iter().map(|r| label(r).len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}", "");
        for s in Statistic::ALL {
            out.push_str(&format!("{:>9}", s.heading()));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:<width$}", label(r)));
            for m in r.means {
                match m {
                    Some(v) => out.push_str(&format!("{v:>9.3}")),
                    None => out.push_str(&format!("{:>9}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Long-format CSV: `variable,category,method,m_index,statistic,value`.
pub fn write_records_csv<W: Write>(records: &[DiscrepancyRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["variable", "category", "method", "m_index", "statistic", "value"])?;
    for r in records {
        wtr.write_record([
            r.variable.clone(),
            r.category.clone().unwrap_or_default(),
            r.method.clone(),
            r.imputation_index.to_string(),
            r.statistic.name().to_string(),
            r.value.to_string(),
        ])?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<records csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<DiscrepancyRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = |name: &str| {
        find(name).ok_or_else(|| Error::Schema(format!("records file lacks a `{name}` column")))
    };
    let variable = find("variable");
    let category = find("category");
    let index = find("m_index").or_else(|| find("rep"));
    let method = col("method")?;
    let statistic = col("statistic")?;
    let value = col("value")?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != headers.len() {
            return Err(Error::RaggedRow {
                row,
                expected: headers.len(),
                found: rec.len(),
            });
        }
        let bad = |column: &str, message: String| Error::TypeViolation {
            row,
            column: column.to_string(),
            message,
        };
        let stat: Statistic = rec[statistic]
            .parse()
            .map_err(|_| bad("statistic", format!("unknown statistic `{}`", &rec[statistic])))?;
        let v: f64 = rec[value]
            .parse()
            .map_err(|_| bad("value", format!("`{}` is not numeric", &rec[value])))?;
        if !v.is_finite() {
            return Err(bad("value", "non-finite value".into()));
        }
        let imputation_index = match index {
            Some(k) => rec[k]
                .parse()
                .map_err(|_| bad("m_index", format!("`{}` is not an index", &rec[k])))?,
            None => 0,
        };
        out.push(DiscrepancyRecord {
            variable: variable.map(|k| rec[k].to_string()).unwrap_or_default(),
            category: category.map(|k| rec[k].to_string()).filter(|c| !c.is_empty()),
            method: rec[method].to_string(),
            imputation_index,
            statistic: stat,
            value: v,
        });
    }
    Ok(out)
}
