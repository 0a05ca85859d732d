//! Secrecy against transmit antenna count through the experiment runner.

use fjsim::channel::{Antennas, CsiMode};
use fjsim::harness::{execute, Experiment, ExperimentConfig, Scheme, TrainConfig};

fn main() -> fjsim::Result<()> {
    let cfg = ExperimentConfig {
        experiment: Experiment::SecrecyVsNt,
        antennas: Antennas::new(2, 2, 2)?,
        snr_grid_db: vec![10.0],
        csi: CsiMode::Perfect,
        scheme: Scheme::ConventionalExhaustive,
        schemes: vec![],
        mc_draws: 2000,
        seed: 0,
        nt_grid: vec![2, 4, 6, 8],
        train: TrainConfig::default(),
    };
    for r in execute(&cfg)?.rows.iter().filter(|r| r.metric == "secrecy_rate") {
        println!("N_t {}: {:.4} +- {:.4} nats", r.antennas.nt, r.value, r.std_error.unwrap_or(0.0));
    }
    Ok(())
}
