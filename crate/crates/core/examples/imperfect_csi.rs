//! Average secrecy when the transmitter designs from a noisy channel estimate.

use fjsim::channel::{Antennas, CsiMode};
use fjsim::conventional::{average_secrecy, FixedSplit};
use fjsim::harness::paired_ensemble;

fn main() -> fjsim::Result<()> {
    let ant = Antennas::new(4, 2, 2)?;
    let p = 10f64.powf(15.0 / 10.0);
    let modes = [0.01, 0.05, 0.1, 0.3].map(|rho_e2| CsiMode::Statistical { rho_e2 });
    for mode in std::iter::once(CsiMode::Perfect).chain(modes) {
        let ens = paired_ensemble(ant, mode, 2, 5000)?;
        let s = average_secrecy(&FixedSplit { phi: 0.6 }, &ens, p)?;
        println!("rho_e2 {:<5} R_s {:.4} +- {:.4} nats", mode.error_variance(), s.mean, s.std_error);
    }
    Ok(())
}
