//! Diagnostics for choosing between missing-data imputation models.
//!
//! For an incomplete variable, the rows whose value was observed are
//! reweighted with stable balancing weights so their covariate moments match
//! the rows that were imputed. Under missing-at-random the weighted density of
//! observed values should then look like the density of imputed values, and
//! four discrepancy statistics (absolute SMD, absolute log variance ratio,
//! Kolmogorov-Smirnov and one minus the overlap coefficient) measure how far
//! apart they are. Smaller is better; averaging the statistics across
//! imputations and variables ranks competing imputation methods.
//!
//! Modules:
//!
//! * [`data`]: datasets, CSV and schema IO, design matrices.
//! * [`balance`]: the balancing-weights quadratic program.
//! * [`discrepancy`]: weighted two-sample statistics and pooling.
//! * [`imputers`]: PMM, hot-deck, normal-model and random-forest imputation
//!   plus the chained-equations driver.
//! * [`pipeline`]: the per-variable diagnostic over completed datasets.
//! * [`experiments`]: the Monte Carlo study.
//!
//! ```
//! use impdiag::experiments::{generate, SimConfig};
//! use impdiag::{diagnose, mice_chain, CompletedRun, DiagnoseOptions, ImputerConfig, Method, MethodAssignment};
//!
//! let sim = SimConfig { n: 200, ..Default::default() };
//! let data = generate(&sim, &mut impdiag::rng::substream(1, &[0]))?.masked;
//! let cfg = ImputerConfig { m: 2, seed: 1, ..Default::default() };
//! let run = mice_chain(&data, &MethodAssignment::uniform(Method::Hotdeck), &cfg)?;
//! let runs = [CompletedRun { method: run.method, datasets: run.datasets }];
//! let d = diagnose(&data, &runs, &DiagnoseOptions::default())?;
//! assert_eq!(d.diagnosed, ["y"]);
//! # Ok::<(), impdiag::Error>(())
//! ```

pub mod balance;
pub mod data;
pub mod discrepancy;
pub mod error;
pub mod experiments;
pub mod imputers;
pub mod pipeline;
pub mod rng;

pub use balance::{
    build_problem, kkt_residuals, solve_sbw, solve_sbw_with, verify_balance, BalanceOptions,
    BalanceProblem, BalanceTable, DeltaPolicy, SolverSettings, WeightStatus, WeightVector,
};
pub use data::{
    encode_features, missing_indicator, ColumnKind, ColumnSpec, Dataset, EncodeOptions,
    FeatureMatrix, ImputationRun, IndicatorCoding, Schema,
};
pub use discrepancy::{DiscrepancyRecord, Statistic, WeightedSample};
pub use error::{Error, Result};
pub use imputers::{mice_chain, ImputerConfig, Method, MethodAssignment};
pub use pipeline::{diagnose, CompletedRun, DiagnoseOptions, Diagnosis};

