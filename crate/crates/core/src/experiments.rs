//! Monte Carlo study of the diagnostic.
//!
//! Each replication draws `y = b0 + bx x + bz z + bxz x z + e` with
//! `z ~ Bernoulli(0.5)` and `x ~ U(-5, 5)`, masks `y` at random within each
//! `z` stratum (a higher rate where `z = 1`), imputes with every method,
//! runs the diagnostic on `y` balancing `(x, z)`, and measures how far the
//! pooled OLS coefficients of `y ~ x * z` land from the truth.

use std::fmt::Write as _;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng as _, RngCore};
use rand_distr::{Bernoulli, Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{encode_features, ColumnSpec, Dataset, EncodeOptions, IndicatorCoding, Schema};
use crate::discrepancy::Statistic;
use crate::error::{Error, Result};
use crate::imputers::{fit_linear, mice_chain, ImputerConfig, Method, MethodAssignment};
use crate::pipeline::{diagnose, CompletedRun, DiagnoseOptions};
use crate::rng::{substream, Rng};

/// Names of the four regression terms, in coefficient order.
pub const COEFFICIENTS: [&str; 4] = ["intercept", "x", "z", "x:z"];

const DATA_STREAM: u64 = 0;
const IMPUTE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub reps: usize,
    pub m: usize,
    /// `(b0, bx, bz, bxz)`.
    pub coef: [f64; 4],
    pub error_sd: f64,
    /// Range of the two per-stratum missingness proportions.
    pub miss_range: (f64, f64),
    pub seed: u64,
    /// Highest moment of `x` balanced by the diagnostic.
    pub balance_moments: u32,
    pub methods: Vec<Method>,
    /// Chained-equation passes; one suffices here since only `y` is missing.
    pub sweeps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 1000,
            reps: 1000,
            m: 5,
            coef: [0.0, 0.0, 0.0, 1.0],
            error_sd: 1.0,
            miss_range: (0.1, 0.5),
            seed: 0,
            balance_moments: 1,
            methods: Method::ALL.to_vec(),
            sweeps: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n < 10 {
            return fail(format!("n must be at least 10, got {}", self.n));
        }
        if self.reps < 1 {
            return fail("reps must be at least 1".into());
        }
        if self.m < 1 {
            return fail("m must be at least 1".into());
        }
        if self.sweeps < 1 {
            return fail("sweeps must be at least 1".into());
        }
        if self.balance_moments < 1 {
            return fail("balance_moments must be at least 1".into());
        }
        if !(self.error_sd.is_finite() && self.error_sd >= 0.0) {
            return fail(format!("error_sd must be finite and nonnegative, got {}", self.error_sd));
        }
        if self.coef.iter().any(|c| !c.is_finite()) {
            return fail("coefficients must be finite".into());
        }
        let (lo, hi) = self.miss_range;
        // lo == hi is allowed: it turns the design into MCAR
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return fail(format!("miss_range ({lo}, {hi}) must satisfy 0 < low <= high < 1"));
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        Ok(())
    }
}

/// One simulated dataset before and after masking.
#[derive(Debug, Clone)]
pub struct Generated {
    pub full: Dataset,
    pub masked: Dataset,
    /// Missingness proportion of `y` where `z = 0` and where `z = 1`.
    pub proportions: (f64, f64),
}

pub fn sim_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::continuous("x"),
        ColumnSpec::binary("z"),
        ColumnSpec::continuous("y"),
    ])
    .expect("fixed schema is valid")
}

/// Draw a full dataset and its masked copy.
pub fn generate(cfg: &SimConfig, rng: &mut Rng) -> Result<Generated> {
    cfg.validate()?;
    let n = cfg.n;
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let z: Vec<f64> = (0..n).map(|_| f64::from(u8::from(coin.sample(rng)))).collect();
    let ux = Uniform::new(-5.0, 5.0).expect("valid range");
    let x: Vec<f64> = (0..n).map(|_| ux.sample(rng)).collect();
    let noise = Normal::new(0.0, cfg.error_sd).expect("valid sd");
    let [b0, bx, bz, bxz] = cfg.coef;
    let y: Vec<f64> = (0..n)
        .map(|i| b0 + bx * x[i] + bz * z[i] + bxz * x[i] * z[i] + noise.sample(rng))
        .collect();

    let (lo, hi) = cfg.miss_range;
    let mut draw = || if lo < hi { rng.random_range(lo..hi) } else { lo };
    let (a, b) = (draw(), draw());
    let proportions = (a.min(b), a.max(b));

    let mut cells: Vec<Option<f64>> = y.iter().copied().map(Some).collect();
    for (level, p) in [(0.0, proportions.0), (1.0, proportions.1)] {
        let stratum: Vec<usize> = (0..n).filter(|&i| z[i] == level).collect();
        let count = ((p * stratum.len() as f64).round() as usize).min(stratum.len());
        for k in sample(rng, stratum.len(), count).iter() {
            cells[stratum[k]] = None;
        }
    }
    let schema = sim_schema();
    let full = Dataset::from_complete(schema.clone(), vec![x.clone(), z.clone(), y])?;
    let masked = Dataset::from_cells(
        schema,
        vec![
            x.into_iter().map(Some).collect(),
            z.into_iter().map(Some).collect(),
            cells,
        ],
    )?;
    Ok(Generated {
        full,
        masked,
        proportions,
    })
}

/// Masked dataset only.
pub fn gen_dataset(cfg: &SimConfig, rng: &mut Rng) -> Result<Dataset> {
    generate(cfg, rng).map(|g| g.masked)
}

/// OLS coefficients of `y ~ 1 + x + z + x:z` on a complete dataset with
/// columns `x`, `z` and `y`.
pub fn ols_interaction(ds: &Dataset) -> Result<[f64; 4]> {
    let y = ds.values(ds.index_of("y")?);
    if ds.missing_count(ds.index_of("y")?) > 0 {
        return Err(Error::Incomplete("y".into()));
    }
    let design = encode_features(
        ds,
        Some("y"),
        &EncodeOptions {
            moments: 1,
            interactions: vec![("x".into(), "z".into())],
            coding: IndicatorCoding::DropReference,
        },
    )?;
    if design.ncols() != 3 {
        return Err(Error::InvalidArgument(format!(
            "expected design x, z, x:z; got {} columns",
            design.ncols()
        )));
    }
    let fit = fit_linear(y, &design)?;
    if !fit.dropped.is_empty() {
        return Err(Error::RankDeficient(format!(
            "interaction design drops {:?}",
            fit.dropped
        )));
    }
    Ok([
        fit.coefficients[0],
        fit.coefficients[1],
        fit.coefficients[2],
        fit.coefficients[3],
    ])
}

/// Elementwise mean of coefficient vectors.
pub fn pool_coefficients(fits: &[[f64; 4]]) -> Result<[f64; 4]> {
    if fits.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut out = [0.0; 4];
    for f in fits {
        for (o, v) in out.iter_mut().zip(f) {
            *o += v;
        }
    }
    Ok(out.map(|s| s / fits.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    /// Statistic means over the `m` imputations, indexed by [`Statistic::index`].
    pub statistics: [f64; 4],
    /// `truth - pooled estimate` per coefficient.
    pub bias: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub rep: usize,
    pub proportions: (f64, f64),
    pub methods: Vec<MethodResult>,
    /// Bias of OLS on the data before masking.
    pub full_data_bias: [f64; 4],
}

/// One replication with its own substreams.
pub fn run_rep(cfg: &SimConfig, rep: usize) -> Result<RepResult> {
    let mut data_rng = substream(cfg.seed, &[rep as u64, DATA_STREAM]);
    let g = generate(cfg, &mut data_rng)?;
    let mut seeds = substream(cfg.seed, &[rep as u64, IMPUTE_STREAM]);

    let mut runs = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let icfg = ImputerConfig {
            method,
            m: cfg.m,
            sweeps: cfg.sweeps,
            seed: seeds.next_u64(),
            ..Default::default()
        };
        let run = mice_chain(&g.masked, &MethodAssignment::uniform(method), &icfg)?;
        runs.push(CompletedRun {
            method: method.to_string(),
            datasets: run.datasets,
        });
    }

    let mut options = DiagnoseOptions {
        min_missing: 1,
        ..Default::default()
    };
    options.balance.encode.moments = cfg.balance_moments;
    let diagnosis = diagnose(&g.masked, &runs, &options)?;
    if let Some(f) = diagnosis.failures.first() {
        return Err(Error::Balance {
            variable: f.variable.clone(),
            message: format!("{} imputation {}: {}", f.method, f.imputation_index, f.message),
        });
    }

    let truth = cfg.coef;
    let mut methods = Vec::with_capacity(runs.len());
    for (run, &method) in runs.iter().zip(&cfg.methods) {
        let mut sums = [0.0; 4];
        let mut counts = [0usize; 4];
        for r in diagnosis.records.iter().filter(|r| r.method == run.method) {
            sums[r.statistic.index()] += r.value;
            counts[r.statistic.index()] += 1;
        }
        let statistics = std::array::from_fn(|k| {
            if counts[k] > 0 {
                sums[k] / counts[k] as f64
            } else {
                f64::NAN
            }
        });
        let fits = run.datasets.iter().map(ols_interaction).collect::<Result<Vec<_>>>()?;
        let pooled = pool_coefficients(&fits)?;
        methods.push(MethodResult {
            method,
            statistics,
            bias: std::array::from_fn(|k| truth[k] - pooled[k]),
        });
    }
    let full = ols_interaction(&g.full)?;
    Ok(RepResult {
        rep,
        proportions: g.proportions,
        methods,
        full_data_bias: std::array::from_fn(|k| truth[k] - full[k]),
    })
}

/// Distribution summary of one quantity across replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linearly interpolated quantile of sorted data (`(n-1)p` positions).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    /// Summary of the finite values in `values`; `None` when there are none.
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Quantiles {
            count: v.len(),
            mean,
            sd,
            min: v[0],
            q25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub statistics: [Option<Quantiles>; 4],
    pub bias: [Option<Quantiles>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepFailure {
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub config: SimConfig,
    pub reps: Vec<RepResult>,
    pub failures: Vec<RepFailure>,
    pub summary: Vec<MethodSummary>,
    pub full_data_bias: [Option<Quantiles>; 4],
}

impl MonteCarlo {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Mean of a statistic for a method across successful replications.
    pub fn mean_statistic(&self, method: Method, stat: Statistic) -> Option<f64> {
        self.method(method)?.statistics[stat.index()].map(|q| q.mean)
    }

    /// Mean bias of coefficient `k` for a method.
    pub fn mean_bias(&self, method: Method, k: usize) -> Option<f64> {
        self.method(method)?.bias[k].map(|q| q.mean)
    }
}

/// Run all replications in parallel. Failed replications are recorded and
/// left out of the summary; more than 5% failures is an error.
pub fn run_monte_carlo(cfg: &SimConfig) -> Result<MonteCarlo> {
    cfg.validate()?;
    let outcomes: Vec<Result<RepResult>> = (0..cfg.reps).into_par_iter().map(|r| run_rep(cfg, r)).collect();
    let mut reps = Vec::new();
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => reps.push(r),
            Err(e) => failures.push(RepFailure {
                rep,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() * 20 > cfg.reps {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: cfg.reps,
            first: format!("replication {}: {}", failures[0].rep, failures[0].message),
        });
    }
    let summary = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let column = |f: &dyn Fn(&MethodResult) -> f64| -> Vec<f64> {
                reps.iter().map(|r| f(&r.methods[k])).collect()
            };
            MethodSummary {
                method,
                statistics: std::array::from_fn(|s| Quantiles::of(&column(&|m| m.statistics[s]))),
                bias: std::array::from_fn(|c| Quantiles::of(&column(&|m| m.bias[c]))),
            }
        })
        .collect();
    let full_data_bias = std::array::from_fn(|c| {
        Quantiles::of(&reps.iter().map(|r| r.full_data_bias[c]).collect::<Vec<_>>())
    });
    Ok(MonteCarlo {
        config: cfg.clone(),
        reps,
        failures,
        summary,
        full_data_bias,
    })
}

/// One row per (rep, method, statistic).
pub fn write_statistics_csv<W: Write>(mc: &MonteCarlo, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rep", "method", "statistic", "value"])?;
    for r in &mc.reps {
        for m in &r.methods {
            for s in Statistic::ALL {
                let v = m.statistics[s.index()];
                let cell = if v.is_finite() { v.to_string() } else { String::new() };
                w.write_record([r.rep.to_string(), m.method.to_string(), s.to_string(), cell])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row per (rep, method, coefficient).
pub fn write_bias_csv<W: Write>(mc: &MonteCarlo, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rep", "method", "coefficient", "truth", "estimate", "bias"])?;
    for r in &mc.reps {
        for m in &r.methods {
            for (k, name) in COEFFICIENTS.iter().enumerate() {
                let truth = mc.config.coef[k];
                w.write_record([
                    r.rep.to_string(),
                    m.method.to_string(),
                    name.to_string(),
                    truth.to_string(),
                    (truth - m.bias[k]).to_string(),
                    m.bias[k].to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Compact table of means.
pub fn summary_text(mc: &MonteCarlo) -> String {
    let mut out = String::new();
    let ok = mc.reps.len();
    let _ = writeln!(
        out,
        "{} replications ({} failed), n = {}, m = {}, seed = {}",
        ok + mc.failures.len(),
        mc.failures.len(),
        mc.config.n,
        mc.config.m,
        mc.config.seed
    );
    let _ = writeln!(out, "\nMean discrepancy (lower is better)");
    let _ = write!(out, "{:<10}", "method");
    for s in Statistic::ALL {
        let _ = write!(out, "{:>10}", s.heading());
    }
    out.push('\n');
    let cell = |q: &Option<Quantiles>| q.map_or("-".to_string(), |q| format!("{:.4}", q.mean));
    for m in &mc.summary {
        let _ = write!(out, "{:<10}", m.method.name());
        for q in &m.statistics {
            let _ = write!(out, "{:>10}", cell(q));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "\nMean bias (truth - pooled estimate)");
    let _ = write!(out, "{:<10}", "method");
    for c in COEFFICIENTS {
        let _ = write!(out, "{:>10}", c);
    }
    out.push('\n');
    for m in &mc.summary {
        let _ = write!(out, "{:<10}", m.method.name());
        for q in &m.bias {
            let _ = write!(out, "{:>10}", cell(q));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<10}", "full-data");
    for q in &mc.full_data_bias {
        let _ = write!(out, "{:>10}", cell(q));
    }
    out.push('\n');
    for f in &mc.failures {
        let _ = writeln!(out, "replication {} failed: {}", f.rep, f.message);
    }
    out
}
