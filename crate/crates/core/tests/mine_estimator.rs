//! Statistical behavior of the trained DV estimator.

use fjsim::channel::stream_rng;
use fjsim::mine::{gaussian_mi_oracle, gaussian_pairs, MineEstimator};
use fjsim::neuralnet::AdamConfig;

fn trained(rho: f64, n: usize, steps: usize, hidden: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 0);
    let (x, y) = gaussian_pairs(rho, n, &mut rng);
    let (xt, yt) = gaussian_pairs(rho, n, &mut rng);
    let mut est = MineEstimator::new(1, 1, hidden, &mut stream_rng(seed, 1)).unwrap();
    est.fit(&x, &y, steps, 256, &AdamConfig::default(), &mut rng).unwrap();
    est.dv_estimate(&xt, &yt).unwrap().value
}

#[test]
fn independent_pair_estimates_near_zero() {
    let v = trained(0.0, 20_000, 500, 32, 1);
    assert!(v.abs() <= 0.05, "{v}");
}

#[test]
fn half_correlation_within_tolerance_after_500_steps() {
    let v = trained(0.5, 20_000, 500, 32, 2);
    assert!((v - gaussian_mi_oracle(0.5).unwrap()).abs() <= 0.1, "{v}");
}

#[test]
fn held_out_estimates_do_not_exceed_truth_on_average() {
    let truth = gaussian_mi_oracle(0.8).unwrap();
    let runs = 50;
    let mean = (0..runs).map(|s| trained(0.8, 2000, 200, 16, 100 + s)).sum::<f64>() / runs as f64;
    assert!(mean <= truth + 0.05, "{mean} vs {truth}");
}
