//! Calibration run for the Monte Carlo acceptance checks.
//!
//! `cargo run --release --example pilot -- [seed] [reps] [low] [high]`

use impdiag::experiments::{run_monte_carlo, summary_text, SimConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).map_or(default, |s| s.parse().expect("number"));
    let cfg = SimConfig {
        seed: arg(0, 2718.0) as u64,
        reps: arg(1, 200.0) as usize,
        miss_range: (arg(2, 0.1), arg(3, 0.5)),
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let mc = run_monte_carlo(&cfg).expect("monte carlo run");
    print!("{}", summary_text(&mc));
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
}
