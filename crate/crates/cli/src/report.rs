use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use impdiag::discrepancy::{pool_records, read_records_csv, Grouping};
use impdiag::{DiscrepancyRecord, Statistic};

use crate::manifest::ManifestBuilder;
use crate::svg::{box_summary, render, Panel, WHISKER_NOTE};
use crate::{emit, ensure_dir, Classify, CliResult, ReportArgs};

/// Values per method label.
type Groups = Vec<(String, Vec<f64>)>;

/// Values grouped by a key, keeping first-appearance order.
fn group<'a, K: PartialEq + Clone>(items: impl Iterator<Item = (K, &'a str, f64)>) -> Vec<(K, Groups)> {
    let mut out: Vec<(K, Groups)> = Vec::new();
    for (key, method, value) in items {
        let slot = match out.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                out.push((key, Vec::new()));
                out.len() - 1
            }
        };
        let groups = &mut out[slot].1;
        match groups.iter_mut().find(|(m, _)| m == method) {
            Some((_, v)) => v.push(value),
            None => groups.push((method.to_string(), vec![value])),
        }
    }
    out
}

struct BiasRow {
    method: String,
    coefficient: String,
    bias: f64,
}

fn read_bias(path: &Path) -> anyhow::Result<Vec<BiasRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{} lacks a `{name}` column", path.display()))
    };
    let (method, coefficient, bias) = (col("method")?, col("coefficient")?, col("bias")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.with_context(|| format!("{} row {row}", path.display()))?;
        let value: f64 = rec
            .get(bias)
            .and_then(|v| v.parse().ok())
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| anyhow!("{} row {row}: bias is not a finite number", path.display()))?;
        out.push(BiasRow {
            method: rec.get(method).unwrap_or_default().to_string(),
            coefficient: rec.get(coefficient).unwrap_or_default().to_string(),
            bias: value,
        });
    }
    if out.is_empty() {
        bail!("{} holds no bias rows", path.display());
    }
    Ok(out)
}

fn load_records(paths: &[std::path::PathBuf]) -> anyhow::Result<Vec<DiscrepancyRecord>> {
    let mut all = Vec::new();
    for path in paths {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let records = read_records_csv(file).with_context(|| format!("reading {}", path.display()))?;
        all.extend(records);
    }
    if all.is_empty() {
        bail!("no records in the input files");
    }
    Ok(all)
}

fn describe(groups: &[(String, Vec<f64>)], out: &mut String) {
    for (method, values) in groups {
        if let Some(b) = box_summary(values) {
            let _ = writeln!(
                out,
                "  {method:<12} n={:<6} mean={:.4} median={:.4} IQR=[{:.4}, {:.4}] whiskers=[{:.4}, {:.4}] outliers={}",
                b.n,
                b.mean,
                b.median,
                b.q1,
                b.q3,
                b.low_whisker,
                b.high_whisker,
                b.outliers.len()
            );
        }
    }
}

pub(crate) fn run(args: &ReportArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("report");
    let per_variable: Statistic = args.statistic.parse().usage()?;
    if let Some(c) = args.clip {
        if !c.is_finite() {
            return Err(anyhow!("--clip must be finite")).usage();
        }
    }
    let records = load_records(&args.records).runtime()?;
    let bias = args.bias.as_deref().map(read_bias).transpose().runtime()?;

    ensure_dir(&args.out)?;
    manifest.config("statistic", per_variable.name());
    if let Some(c) = args.clip {
        manifest.config("clip", c);
    }
    for p in &args.records {
        manifest.input(p).runtime()?;
    }
    if let Some(p) = &args.bias {
        manifest.input(p).runtime()?;
    }

    let mut text = String::new();
    let _ = writeln!(text, "{WHISKER_NOTE}");
    if let Some(c) = args.clip {
        let _ = writeln!(text, "Plots clip the value axis at {c}.");
    }
    let _ = writeln!(text, "\nMean discrepancy by method (lower is better)");
    text.push_str(&pool_records(&records, Grouping::PerMethod).runtime()?.to_text());

    let mut by_stat = group(records.iter().map(|r| (r.statistic, r.method.as_str(), r.value)));
    by_stat.sort_by_key(|(s, _)| s.index());
    let panels: Vec<Panel> = by_stat
        .iter()
        .map(|(s, groups)| Panel {
            title: s.heading().to_string(),
            groups: groups.clone(),
        })
        .collect();
    for (s, groups) in &by_stat {
        let _ = writeln!(text, "\n{}", s.heading());
        describe(groups, &mut text);
    }
    let svg = render("Discrepancy statistics", &panels, args.clip);
    emit(&args.out, "statistics.svg", svg.as_bytes(), &mut manifest)?;

    let named: Vec<&DiscrepancyRecord> = records
        .iter()
        .filter(|r| !r.variable.is_empty() && r.statistic == per_variable)
        .collect();
    if !named.is_empty() {
        let by_var = group(named.iter().map(|r| (r.variable.clone(), r.method.as_str(), r.value)));
        let panels: Vec<Panel> = by_var
            .iter()
            .map(|(v, groups)| Panel {
                title: v.clone(),
                groups: groups.clone(),
            })
            .collect();
        let _ = writeln!(text, "\n{} by variable", per_variable.heading());
        for (v, groups) in &by_var {
            let _ = writeln!(text, " {v}");
            describe(groups, &mut text);
        }
        let title = format!("{} by variable", per_variable.heading());
        let svg = render(&title, &panels, args.clip);
        emit(&args.out, "variables.svg", svg.as_bytes(), &mut manifest)?;
    }

    if let Some(rows) = &bias {
        let by_coef = group(rows.iter().map(|r| (r.coefficient.clone(), r.method.as_str(), r.bias)));
        let panels: Vec<Panel> = by_coef
            .iter()
            .map(|(c, groups)| Panel {
                title: c.clone(),
                groups: groups.clone(),
            })
            .collect();
        let _ = writeln!(text, "\nBias (truth - pooled estimate)");
        for (c, groups) in &by_coef {
            let _ = writeln!(text, " {c}");
            describe(groups, &mut text);
        }
        let svg = render("Coefficient bias", &panels, None);
        emit(&args.out, "bias.svg", svg.as_bytes(), &mut manifest)?;
    }

    emit(&args.out, "report.txt", text.as_bytes(), &mut manifest)?;
    manifest.write(&args.out).runtime()?;
    print!("{text}");
    Ok(())
}
