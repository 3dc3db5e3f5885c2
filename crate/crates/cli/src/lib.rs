//! The `impdiag` command line: `impute`, `diagnose`, `simulate`, `report`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! failure. Every command writes into `--out` and finishes by writing a
//! `manifest.toml` there.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod diagnose;
mod impute;
pub mod manifest;
mod report;
mod simulate;
pub mod svg;

pub use manifest::{read_manifest, RunManifest, MANIFEST_NAME};

/// Error carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, schema or configuration: exit 2.
    Usage(anyhow::Error),
    /// Failure while doing the work: exit 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tag an error with its exit class.
pub(crate) trait Classify<T> {
    fn usage(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError::Usage(e.into()))
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "impdiag", version, about = "Diagnostics for comparing multiple-imputation models")]
pub struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "IMPDIAG_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete a dataset m times by chained equations.
    Impute(ImputeArgs),
    /// Score completed datasets against balanced observed values.
    Diagnose(DiagnoseArgs),
    /// Run the Monte Carlo study.
    Simulate(SimulateArgs),
    /// Render box plots and a text summary from record files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// A global method (pmm, hotdeck, norm, rforest) and/or `var=method` overrides.
    #[arg(long, num_args = 1.., required = true)]
    pub method: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 5)]
    pub donors: usize,
    #[arg(long, default_value_t = 10)]
    pub trees: usize,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    /// Comma-separated visit order for the chained equations.
    #[arg(long, value_delimiter = ',')]
    pub visit_order: Option<Vec<String>>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Original data with missing cells.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Directory written by `impute`; `LABEL=DIR` renames its method. Repeatable.
    #[arg(long)]
    pub run: Vec<String>,
    /// Completed CSV files given directly, labelled by `--label`.
    #[arg(long, num_args = 1..)]
    pub completed: Vec<PathBuf>,
    #[arg(long, default_value = "completed")]
    pub label: String,
    /// Variables with fewer imputed cells are skipped.
    #[arg(long, default_value_t = 25)]
    pub min_missing: usize,
    /// Highest moment of continuous covariates to balance.
    #[arg(long, default_value_t = 1)]
    pub moments: u32,
    /// Interaction terms `a:b` to balance; `*` matches every variable.
    #[arg(long, num_args = 1..)]
    pub interactions: Vec<String>,
    /// Balance tolerance on indicator columns.
    #[arg(long, default_value_t = 0.0)]
    pub indicator_delta: f64,
    /// Balance tolerance on other columns, in observed-group sd units.
    #[arg(long, default_value_t = 1e-3)]
    pub sd_delta: f64,
    /// Drop-reference instead of full indicator coding for categorical covariates.
    #[arg(long)]
    pub drop_reference: bool,
    /// Keep the sign of SMD and log(VR).
    #[arg(long)]
    pub signed: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// True `b0,bx,bz,bxz`.
    #[arg(long, value_delimiter = ',', default_value = "0,0,0,1", allow_hyphen_values = true)]
    pub coef: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub error_sd: f64,
    #[arg(long, default_value_t = 0.1)]
    pub miss_low: f64,
    #[arg(long, default_value_t = 0.5)]
    pub miss_high: f64,
    /// Highest moment of x balanced by the diagnostic (2 adds x^2).
    #[arg(long, default_value_t = 1)]
    pub balance_moments: u32,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Long-format record CSVs from `diagnose` or `simulate`.
    #[arg(long, num_args = 1.., required = true)]
    pub records: Vec<PathBuf>,
    /// Bias CSV from `simulate`.
    #[arg(long)]
    pub bias: Option<PathBuf>,
    /// Upper limit of every value axis; points above it are counted at the edge.
    #[arg(long)]
    pub clip: Option<f64>,
    /// Statistic shown in the per-variable panels.
    #[arg(long, default_value = "SMD")]
    pub statistic: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage(anyhow::anyhow!("--threads must be at least 1")));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().runtime()?;
    pool.install(|| match cli.command {
        Command::Impute(a) => impute::run(&a),
        Command::Diagnose(a) => diagnose::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Report(a) => report::run(&a),
    })
}

/// Create the output directory.
pub(crate) fn ensure_dir(dir: &std::path::Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("creating {}: {e}", dir.display()))
        .runtime()
}

/// Write one output file atomically and note it in the manifest.
pub(crate) fn emit(
    dir: &std::path::Path,
    name: &str,
    bytes: &[u8],
    manifest: &mut manifest::ManifestBuilder,
) -> CliResult<()> {
    manifest::write_atomic(&dir.join(name), bytes).runtime()?;
    manifest.output(name);
    Ok(())
}
