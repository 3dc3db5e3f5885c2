//! Inputs shared by the benchmarks in `benches/`.

use impdiag::BalanceProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` observed rows, `p` standard-uniform features, targets shifted off the
/// observed means so some constraints bind, and tolerances of 0.01.
pub fn balance_problem(n: usize, p: usize, seed: u64) -> BalanceProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let targets = columns
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64 + rng.random_range(-0.05..0.05))
        .collect();
    BalanceProblem::from_columns(&columns, targets, vec![0.01; p]).expect("well-formed problem")
}

/// Two standard-normal-ish samples of size `n`, the second shifted.
pub fn samples(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |shift: f64| -> Vec<f64> {
        (0..n)
            .map(|_| (0..12).map(|_| rng.random_range(0.0..1.0)).sum::<f64>() - 6.0 + shift)
            .collect()
    };
    let a = draw(0.0);
    let b = draw(0.3);
    (a, b)
}
