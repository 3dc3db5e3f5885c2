use std::collections::BTreeMap;

use impdiag::imputers::{impute_column, impute_hotdeck, impute_norm, impute_pmm, impute_rforest, SWEEP_STREAM};
use impdiag::rng::substream;
use impdiag::{mice_chain, ColumnKind, ColumnSpec, Dataset, Error, ImputerConfig, Method, MethodAssignment, Schema};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn mixed(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::new(vec![
        ColumnSpec::continuous("x"),
        ColumnSpec::binary("z"),
        ColumnSpec::categorical("c", ["lo", "mid", "hi"]),
        ColumnSpec::continuous("y"),
    ])
    .unwrap();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); 4];
    for _ in 0..n {
        let x: f64 = rng.random_range(-2.0..2.0);
        let z = f64::from(u8::from(rng.random_bool(0.4)));
        let c = (rng.random_range(0..3)) as f64;
        let e: f64 = StandardNormal.sample(&mut rng);
        let y = 1.0 + x - z + 0.5 * c + 0.3 * e;
        cols[0].push(Some(x));
        cols[1].push((!rng.random_bool(0.1)).then_some(z));
        cols[2].push((!rng.random_bool(0.15)).then_some(c));
        cols[3].push((!rng.random_bool(0.25)).then_some(y));
    }
    Dataset::from_cells(schema, cols).unwrap()
}

fn donor_assignment(default: Method) -> MethodAssignment {
    MethodAssignment::uniform(default)
}

fn norm_safe() -> MethodAssignment {
    let mut overrides = BTreeMap::new();
    overrides.insert("c".to_string(), Method::Pmm);
    MethodAssignment {
        default: Some(Method::Norm),
        overrides,
    }
}

fn assignment(method: Method) -> MethodAssignment {
    if method == Method::Norm {
        norm_safe()
    } else {
        donor_assignment(method)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observed_cells_are_never_touched(seed in 0u64..1000, which in 0usize..4) {
        let method = Method::ALL[which];
        let ds = mixed(80, seed);
        let cfg = ImputerConfig { m: 2, sweeps: 2, seed, ..ImputerConfig::with_method(method) };
        let run = mice_chain(&ds, &assignment(method), &cfg).unwrap();
        prop_assert_eq!(run.datasets.len(), 2);
        for out in &run.datasets {
            prop_assert!(out.is_complete());
            for col in 0..ds.ncols() {
                for row in 0..ds.nrows() {
                    let v = out.values(col)[row];
                    prop_assert!(v.is_finite());
                    match ds.get(row, col) {
                        Some(orig) => prop_assert_eq!(orig.to_bits(), v.to_bits()),
                        None => {
                            // every imputation is a legal value of its column
                            prop_assert!(ds.spec(col).validate_value(v));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn donor_methods_copy_observed_values(seed in 0u64..1000, which in 0usize..3) {
        let method = [Method::Pmm, Method::Hotdeck, Method::Rforest][which];
        let ds = mixed(60, seed);
        let cfg = ImputerConfig { m: 1, seed, ..ImputerConfig::with_method(method) };
        let run = mice_chain(&ds, &donor_assignment(method), &cfg).unwrap();
        let y = ds.index_of("y").unwrap();
        let observed: Vec<u64> = (0..ds.nrows()).filter_map(|i| ds.get(i, y)).map(f64::to_bits).collect();
        for row in 0..ds.nrows() {
            if ds.mask(y)[row] {
                prop_assert!(observed.contains(&run.datasets[0].values(y)[row].to_bits()));
            }
        }
    }
}

#[test]
fn runs_are_reproducible_and_copies_differ() {
    let ds = mixed(120, 3);
    for method in Method::ALL {
        let cfg = ImputerConfig { m: 3, seed: 99, ..ImputerConfig::with_method(method) };
        let a = mice_chain(&ds, &assignment(method), &cfg).unwrap();
        let b = mice_chain(&ds, &assignment(method), &cfg).unwrap();
        let y = ds.index_of("y").unwrap();
        for (p, q) in a.datasets.iter().zip(&b.datasets) {
            assert_eq!(p.values(y), q.values(y), "{method}");
        }
        assert_ne!(a.datasets[0].values(y), a.datasets[1].values(y), "{method}");
        assert_eq!(a.method, method.to_string().replace("norm", if method == Method::Norm { "mixed" } else { "norm" }));
    }
}

#[test]
fn single_incomplete_variable_is_one_univariate_draw() {
    let schema = Schema::new(vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")]).unwrap();
    let n = 50;
    let x: Vec<Option<f64>> = (0..n).map(|i| Some((i as f64 * 0.37).sin())).collect();
    let y: Vec<Option<f64>> = (0..n)
        .map(|i| (i % 4 != 1).then(|| 2.0 * (i as f64 * 0.37).sin() + (i as f64).cos() * 0.1))
        .collect();
    let ds = Dataset::from_cells(schema, vec![x, y]).unwrap();
    type Univariate = fn(&Dataset, &str, &ImputerConfig, &mut impdiag::rng::Rng) -> impdiag::Result<Vec<f64>>;
    let singles: [(Method, Univariate); 4] = [
        (Method::Pmm, impute_pmm),
        (Method::Hotdeck, impute_hotdeck),
        (Method::Norm, impute_norm),
        (Method::Rforest, impute_rforest),
    ];
    for (method, single) in singles {
        let cfg = ImputerConfig { m: 3, sweeps: 7, seed: 5, ..ImputerConfig::with_method(method) };
        let run = mice_chain(&ds, &MethodAssignment::uniform(method), &cfg).unwrap();
        for (copy, out) in run.datasets.iter().enumerate() {
            let mut rng = substream(cfg.seed, &[copy as u64, SWEEP_STREAM, 0, 1]);
            let direct = single(&ds, "y", &cfg, &mut rng).unwrap();
            assert_eq!(out.values(1), direct.as_slice(), "{method} copy {copy}");
        }
    }
}

/// Least squares for one predictor, by hand.
fn simple_ols(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
    (icept, slope, ssr / (n - 2.0), mx, sxx)
}

#[test]
fn norm_draws_follow_the_posterior_predictive() {
    let schema = Schema::new(vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 30;
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| 2.0 + 3.0 * x + { let e: f64 = StandardNormal.sample(&mut rng); e * 0.8 })
        .collect();
    let x0 = 4.0; // a missing row outside the observed range
    let mut xcol: Vec<Option<f64>> = xs.iter().copied().map(Some).collect();
    let mut ycol: Vec<Option<f64>> = ys.iter().copied().map(Some).collect();
    xcol.push(Some(x0));
    ycol.push(None);
    let ds = Dataset::from_cells(schema, vec![xcol, ycol]).unwrap();

    let (a, b, s2, mx, sxx) = simple_ols(&xs, &ys);
    let df = n as f64 - 2.0;
    let mean = a + b * x0;
    // Student-t predictive: scale^2 = s^2 (1 + 1/n + (x0 - mean x)^2 / Sxx)
    let var = s2 * (1.0 + 1.0 / n as f64 + (x0 - mx).powi(2) / sxx) * df / (df - 2.0);

    let draws = 10_000;
    let cfg = ImputerConfig::with_method(Method::Norm);
    let mut rng = substream(1, &[]);
    let v: Vec<f64> = (0..draws)
        .map(|_| impute_norm(&ds, "y", &cfg, &mut rng).unwrap()[n])
        .collect();
    let got_mean = v.iter().sum::<f64>() / draws as f64;
    let got_var = v.iter().map(|d| (d - got_mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    let se = (var / draws as f64).sqrt();
    assert!((got_mean - mean).abs() < 3.0 * se, "{got_mean} vs {mean} (se {se})");
    // sd of a sample variance of a t(28) is about 5% of the variance at this size
    assert!((got_var / var - 1.0).abs() < 0.1, "{got_var} vs {var}");
}

#[test]
fn forest_respects_perfect_separation() {
    let schema = Schema::new(vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")]).unwrap();
    let n = 200;
    let x: Vec<f64> = (0..n).map(|i| -5.0 + 10.0 * i as f64 / n as f64).collect();
    let y: Vec<Option<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let missing = i % 7 == 0 && v.abs() > 1.0;
            (!missing).then_some(if v < 0.0 { -3.0 } else { 3.0 })
        })
        .collect();
    let ds = Dataset::from_cells(schema, vec![x.iter().copied().map(Some).collect(), y]).unwrap();
    let cfg = ImputerConfig::with_method(Method::Rforest);
    for seed in 0..10 {
        let out = impute_rforest(&ds, "y", &cfg, &mut substream(seed, &[])).unwrap();
        for i in 0..n {
            if ds.mask(1)[i] {
                assert_eq!(out[i], if x[i] < 0.0 { -3.0 } else { 3.0 });
            }
        }
    }
}

/// The k observed rows nearest to each missing row in one covariate.
fn naive_pool(x: &[f64], missing: &[bool], row: usize, k: usize) -> Vec<usize> {
    let mut obs: Vec<usize> = (0..x.len()).filter(|&i| !missing[i]).collect();
    obs.sort_by(|&a, &b| (x[a] - x[row]).abs().total_cmp(&(x[b] - x[row]).abs()));
    obs.truncate(k);
    obs
}

#[test]
fn single_covariate_donors_are_nearest_neighbours() {
    let schema = Schema::new(vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 150;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    // exactly linear, so PMM's posterior draw equals the fit and its
    // prediction distances are |slope| times covariate distances
    let y_exact: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v).collect();
    let missing: Vec<bool> = (0..n).map(|i| i % 5 == 0).collect();
    let ycol: Vec<Option<f64>> = (0..n).map(|i| (!missing[i]).then_some(y_exact[i])).collect();
    let ds = Dataset::from_cells(schema, vec![x.iter().copied().map(Some).collect(), ycol]).unwrap();
    let cfg = ImputerConfig::default();
    for seed in 0..5 {
        for method in [Method::Hotdeck, Method::Pmm] {
            let out = impute_column(&ds, 1, &missing, method, &cfg, &mut substream(seed, &[])).unwrap();
            for i in (0..n).filter(|&i| missing[i]) {
                let pool = naive_pool(&x, &missing, i, cfg.donors);
                assert!(pool.iter().any(|&d| y_exact[d] == out[i]), "{method} row {i}");
            }
        }
    }
}

#[test]
fn categorical_targets() {
    let ds = mixed(100, 17);
    let c = ds.index_of("c").unwrap();
    for method in [Method::Pmm, Method::Hotdeck, Method::Rforest] {
        let cfg = ImputerConfig { m: 1, seed: 4, ..ImputerConfig::with_method(method) };
        let run = mice_chain(&ds, &MethodAssignment::uniform(method), &cfg).unwrap();
        let col = run.datasets[0].values(c);
        assert!(col.iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
    }
    let err = mice_chain(&ds, &MethodAssignment::uniform(Method::Norm), &ImputerConfig::with_method(Method::Norm));
    assert!(matches!(err, Err(Error::MethodKindMismatch { .. })));
    assert_eq!(ds.spec(c).kind, ColumnKind::Categorical);
}

#[test]
fn assignment_errors() {
    let ds = mixed(50, 2);
    let mut overrides = BTreeMap::new();
    overrides.insert("nope".to_string(), Method::Pmm);
    let bad = MethodAssignment { default: Some(Method::Pmm), overrides };
    assert!(mice_chain(&ds, &bad, &ImputerConfig::default()).is_err());
    let mut overrides = BTreeMap::new();
    overrides.insert("y".to_string(), Method::Pmm);
    let partial = MethodAssignment { default: None, overrides };
    assert!(matches!(
        mice_chain(&ds, &partial, &ImputerConfig::default()),
        Err(Error::UnassignedVariable(_))
    ));
}

#[test]
fn too_few_donors() {
    let schema = Schema::new(vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")]).unwrap();
    let x: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
    let y: Vec<Option<f64>> = (0..10).map(|i| (i < 3).then_some(i as f64)).collect();
    let ds = Dataset::from_cells(schema, vec![x, y]).unwrap();
    let err = impute_hotdeck(&ds, "y", &ImputerConfig::default(), &mut substream(0, &[]));
    assert!(matches!(err, Err(Error::InsufficientDonors { available: 3, needed: 5, .. })));
}
