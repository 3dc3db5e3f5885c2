use anyhow::bail;
use impdiag::experiments::{run_monte_carlo, summary_text, write_bias_csv, write_statistics_csv, SimConfig};

use crate::manifest::ManifestBuilder;
use crate::{emit, ensure_dir, Classify, CliResult, SimulateArgs};

fn config(args: &SimulateArgs) -> anyhow::Result<SimConfig> {
    let coef: [f64; 4] = match args.coef.as_slice() {
        &[a, b, c, d] => [a, b, c, d],
        other => bail!("--coef takes four values b0,bx,bz,bxz; got {}", other.len()),
    };
    let cfg = SimConfig {
        n: args.n,
        reps: args.reps,
        m: args.m,
        coef,
        error_sd: args.error_sd,
        miss_range: (args.miss_low, args.miss_high),
        seed: args.seed,
        balance_moments: args.balance_moments,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn run(args: &SimulateArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("simulate");
    let cfg = config(args).usage()?;
    let mc = run_monte_carlo(&cfg).runtime()?;

    ensure_dir(&args.out)?;
    manifest
        .seed(cfg.seed)
        .config("reps", cfg.reps as i64)
        .config("n", cfg.n as i64)
        .config("m", cfg.m as i64)
        .config("coef", cfg.coef.to_vec())
        .config("error_sd", cfg.error_sd)
        .config("miss_range", vec![cfg.miss_range.0, cfg.miss_range.1])
        .config("balance_moments", i64::from(cfg.balance_moments))
        .config("failed_reps", mc.failures.len() as i64);

    let mut stats = Vec::new();
    write_statistics_csv(&mc, &mut stats).runtime()?;
    emit(&args.out, "statistics.csv", &stats, &mut manifest)?;
    let mut bias = Vec::new();
    write_bias_csv(&mc, &mut bias).runtime()?;
    emit(&args.out, "bias.csv", &bias, &mut manifest)?;
    let text = summary_text(&mc);
    emit(&args.out, "summary.txt", text.as_bytes(), &mut manifest)?;
    manifest.write(&args.out).runtime()?;
    print!("{text}");
    Ok(())
}
