//! Exhaustive search for the information/jamming power split that maximizes
//! average secrecy over an ensemble.

use fjsim::channel::{Antennas, CsiMode};
use fjsim::conventional::{exhaustive_power_split, DEFAULT_GRID_STEPS};
use fjsim::harness::paired_ensemble;

fn main() -> fjsim::Result<()> {
    let ant = Antennas::new(4, 2, 2)?;
    let ens = paired_ensemble(ant, CsiMode::Perfect, 1, 2000)?;
    for snr in [0.0, 10.0, 20.0] {
        let split = exhaustive_power_split(&ens, 10f64.powf(snr / 10.0), DEFAULT_GRID_STEPS)?;
        let worst = split.grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        println!("{snr:>4} dB: phi* {:.2}  mean R_s {:.4} nats (worst grid point {worst:.4})", split.phi_star, split.mean_rs);
    }
    Ok(())
}
