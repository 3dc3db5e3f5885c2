use std::collections::BTreeMap;

use anyhow::{anyhow, bail};
use impdiag::{mice_chain, Dataset, ImputerConfig, Method, MethodAssignment, Schema};

use crate::manifest::ManifestBuilder;
use crate::{emit, ensure_dir, Classify, CliResult, ImputeArgs};

/// `pmm` sets the fallback, `var=hotdeck` an override.
pub(crate) fn parse_methods(tokens: &[String]) -> anyhow::Result<MethodAssignment> {
    let mut default = None;
    let mut overrides = BTreeMap::new();
    for token in tokens {
        match token.split_once('=') {
            Some((var, name)) => {
                if var.is_empty() {
                    bail!("method override `{token}` has no variable name");
                }
                let method: Method = name.parse()?;
                if overrides.insert(var.to_string(), method).is_some() {
                    bail!("variable `{var}` is assigned twice");
                }
            }
            None => {
                let method: Method = token.parse()?;
                if default.replace(method).is_some() {
                    bail!("more than one global method given");
                }
            }
        }
    }
    Ok(MethodAssignment { default, overrides })
}

pub(crate) fn run(args: &ImputeArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("impute");
    let methods = parse_methods(&args.method).usage()?;
    let cfg = ImputerConfig {
        method: methods.default.unwrap_or(Method::Pmm),
        donors: args.donors,
        trees: args.trees,
        min_leaf: args.min_leaf,
        m: args.m,
        sweeps: args.sweeps,
        seed: args.seed,
        visit_order: args.visit_order.clone(),
    };
    cfg.validate().usage()?;
    let schema = Schema::load(&args.schema).usage()?;
    let data = Dataset::load_csv(&args.data, &schema).runtime()?;
    // method/kind problems are configuration errors, found before any work
    let resolved = methods.resolve(&data).usage()?;
    if let Some(order) = &cfg.visit_order {
        for name in order {
            data.index_of(name).usage()?;
        }
    }

    let run = mice_chain(&data, &methods, &cfg).runtime()?;

    let stem = args
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| anyhow!("data path has no file name"))
        .usage()?;
    ensure_dir(&args.out)?;
    manifest.seed(args.seed).method(&run.method);
    manifest
        .config("m", args.m as i64)
        .config("sweeps", args.sweeps as i64)
        .config("donors", args.donors as i64)
        .config("trees", args.trees as i64)
        .config("min_leaf", args.min_leaf as i64);
    let mut assignment = toml::Table::new();
    for (var, method) in &resolved {
        assignment.insert(var.clone(), method.to_string().into());
    }
    manifest.config("methods", assignment);
    if let Some(order) = &cfg.visit_order {
        manifest.config("visit_order", order.clone());
    }
    manifest.input(&args.data).runtime()?;
    manifest.input(&args.schema).runtime()?;
    for (k, ds) in run.datasets.iter().enumerate() {
        let name = format!("{stem}.imp{}.csv", k + 1);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).runtime()?;
        emit(&args.out, &name, &buf, &mut manifest)?;
    }
    manifest.write(&args.out).runtime()?;
    eprintln!(
        "wrote {} completed datasets ({}) to {}",
        run.datasets.len(),
        run.method,
        args.out.display()
    );
    Ok(())
}
