use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use impdiag::discrepancy::{pool_records, write_records_csv, Grouping, SuiteOptions};
use impdiag::pipeline::{diagnose, BalanceReport, CompletedRun, DiagnoseOptions, Diagnosis, InteractionSpec};
use impdiag::{BalanceOptions, Dataset, DeltaPolicy, EncodeOptions, IndicatorCoding, Schema};

use crate::manifest::{read_manifest, ManifestBuilder, MANIFEST_NAME};
use crate::{emit, ensure_dir, Classify, CliResult, DiagnoseArgs};

/// A `--run` argument: an impute output directory, optionally relabelled.
struct RunSource {
    label: Option<String>,
    dir: PathBuf,
}

fn parse_run(arg: &str) -> RunSource {
    match arg.split_once('=') {
        Some((label, dir)) if !label.is_empty() && !Path::new(arg).exists() => RunSource {
            label: Some(label.to_string()),
            dir: PathBuf::from(dir),
        },
        _ => RunSource {
            label: None,
            dir: PathBuf::from(arg),
        },
    }
}

fn options(args: &DiagnoseArgs) -> anyhow::Result<DiagnoseOptions> {
    if args.moments < 1 {
        bail!("--moments must be at least 1");
    }
    if !(args.indicator_delta >= 0.0 && args.sd_delta >= 0.0) {
        bail!("balance tolerances must be nonnegative");
    }
    let interactions = args
        .interactions
        .iter()
        .map(|s| s.parse::<InteractionSpec>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiagnoseOptions {
        balance: BalanceOptions {
            encode: EncodeOptions {
                moments: args.moments,
                interactions: Vec::new(),
                coding: if args.drop_reference {
                    IndicatorCoding::DropReference
                } else {
                    IndicatorCoding::Full
                },
            },
            delta: DeltaPolicy {
                indicator: args.indicator_delta,
                sd_fraction: args.sd_delta,
            },
        },
        interactions,
        min_missing: args.min_missing,
        suite: SuiteOptions { signed: args.signed },
        ..Default::default()
    })
}

/// Load completed datasets with their labels and the files they came from.
fn load_runs(args: &DiagnoseArgs, schema: &Schema) -> CliResult<(Vec<CompletedRun>, Vec<PathBuf>)> {
    let mut runs: Vec<CompletedRun> = Vec::new();
    let mut files = Vec::new();
    for arg in &args.run {
        let source = parse_run(arg);
        let manifest = read_manifest(&source.dir.join(MANIFEST_NAME)).usage()?;
        if manifest.command != "impute" {
            return Err(anyhow!(
                "{} was written by `{}`, not `impute`",
                source.dir.display(),
                manifest.command
            ))
            .usage();
        }
        let label = source
            .label
            .or(manifest.method.clone())
            .unwrap_or_else(|| source.dir.display().to_string());
        let mut datasets = Vec::new();
        for name in manifest.outputs.iter().filter(|n| n.ends_with(".csv")) {
            let path = source.dir.join(name);
            datasets.push(Dataset::load_csv(&path, schema).runtime()?);
            files.push(path);
        }
        if datasets.is_empty() {
            return Err(anyhow!("{} lists no completed datasets", source.dir.display())).usage();
        }
        runs.push(CompletedRun {
            method: label,
            datasets,
        });
    }
    if !args.completed.is_empty() {
        let mut datasets = Vec::new();
        for path in &args.completed {
            datasets.push(Dataset::load_csv(path, schema).runtime()?);
            files.push(path.clone());
        }
        runs.push(CompletedRun {
            method: args.label.clone(),
            datasets,
        });
    }
    if runs.is_empty() {
        return Err(anyhow!("give at least one --run directory or --completed file")).usage();
    }
    for (i, r) in runs.iter().enumerate() {
        if runs[..i].iter().any(|o| o.method == r.method) {
            return Err(anyhow!(
                "two runs share the label `{}`; relabel one with LABEL=DIR",
                r.method
            ))
            .usage();
        }
    }
    Ok((runs, files))
}

fn balance_csv(reports: &[BalanceReport]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "variable",
        "method",
        "m_index",
        "status",
        "relaxation",
        "feature",
        "weighted_mean",
        "target",
        "gap",
        "delta",
        "satisfied",
    ])?;
    for r in reports {
        for row in &r.table.rows {
            w.write_record([
                r.variable.clone(),
                r.method.clone(),
                r.imputation_index.to_string(),
                format!("{:?}", r.status).to_lowercase(),
                r.relaxation.to_string(),
                row.feature.clone(),
                row.weighted_mean.to_string(),
                row.target.to_string(),
                row.gap.to_string(),
                row.delta.to_string(),
                row.satisfied.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

fn summary_text(d: &Diagnosis, runs: &[CompletedRun]) -> anyhow::Result<String> {
    let mut out = String::new();
    let labels: Vec<&str> = runs.iter().map(|r| r.method.as_str()).collect();
    writeln!(out, "methods: {}", labels.join(", "))?;
    writeln!(out, "diagnosed: {}", d.diagnosed.join(", "))?;
    for (var, n) in &d.skipped {
        writeln!(out, "skipped: {var} ({n} imputed cells, below threshold)")?;
    }
    let relaxed = d.balance.iter().filter(|b| b.relaxation > 1.0).count();
    writeln!(out, "balance problems: {} solved, {} relaxed", d.balance.len(), relaxed)?;
    if d.records.is_empty() {
        writeln!(out, "\nno discrepancy records")?;
    } else {
        writeln!(out, "\nMean discrepancy by method (lower is better)")?;
        out.push_str(&pool_records(&d.records, Grouping::PerMethod)?.to_text());
        writeln!(out, "\nMean discrepancy by variable")?;
        out.push_str(&pool_records(&d.records, Grouping::PerVariable)?.to_text());
    }
    if !d.failures.is_empty() {
        writeln!(out, "\nfailures")?;
        for f in &d.failures {
            writeln!(out, "{} {} imputation {}: {}", f.variable, f.method, f.imputation_index, f.message)?;
        }
    }
    Ok(out)
}

fn summary_csv(d: &Diagnosis, by: Grouping) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    if d.records.is_empty() {
        let header = match by {
            Grouping::PerVariable => "variable,category,method,SMD,logVR,KS,OVL1\n",
            Grouping::PerMethod => "method,SMD,logVR,KS,OVL1\n",
        };
        buf.extend_from_slice(header.as_bytes());
    } else {
        pool_records(&d.records, by)?.write_csv(&mut buf)?;
    }
    Ok(buf)
}

pub(crate) fn run(args: &DiagnoseArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("diagnose");
    let opts = options(args).usage()?;
    let schema = Schema::load(&args.schema).usage()?;
    let original = Dataset::load_csv(&args.data, &schema).runtime()?;
    for spec in &opts.interactions {
        for side in [&spec.left, &spec.right] {
            if side != "*" {
                original.index_of(side).usage()?;
            }
        }
    }
    let (runs, files) = load_runs(args, &schema)?;
    let d = diagnose(&original, &runs, &opts)
        .context("diagnosing completed datasets")
        .runtime()?;

    ensure_dir(&args.out)?;
    manifest
        .config("min_missing", args.min_missing as i64)
        .config("moments", i64::from(args.moments))
        .config("interactions", args.interactions.clone())
        .config("indicator_delta", args.indicator_delta)
        .config("sd_delta", args.sd_delta)
        .config("drop_reference", args.drop_reference)
        .config("signed", args.signed)
        .config(
            "methods",
            runs.iter().map(|r| r.method.clone()).collect::<Vec<_>>(),
        );
    manifest.input(&args.data).runtime()?;
    manifest.input(&args.schema).runtime()?;
    for f in &files {
        manifest.input(f).runtime()?;
    }

    let mut records = Vec::new();
    write_records_csv(&d.records, &mut records).runtime()?;
    emit(&args.out, "records.csv", &records, &mut manifest)?;
    let by_var = summary_csv(&d, Grouping::PerVariable).runtime()?;
    emit(&args.out, "summary_by_variable.csv", &by_var, &mut manifest)?;
    let by_method = summary_csv(&d, Grouping::PerMethod).runtime()?;
    emit(&args.out, "summary_by_method.csv", &by_method, &mut manifest)?;
    emit(&args.out, "balance.csv", &balance_csv(&d.balance).runtime()?, &mut manifest)?;
    let text = summary_text(&d, &runs).runtime()?;
    emit(&args.out, "summary.txt", text.as_bytes(), &mut manifest)?;
    manifest.write(&args.out).runtime()?;

    for f in &d.failures {
        eprintln!(
            "warning: {} ({} imputation {}): {}",
            f.variable, f.method, f.imputation_index, f.message
        );
    }
    print!("{text}");
    Ok(())
}
