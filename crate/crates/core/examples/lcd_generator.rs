//! Trains the learned FJ generator and compares it with the exhaustive split
//! on shared channel draws.

use fjsim::aefj::{LcdConfig, LcdGenerator, LcdTrainConfig};
use fjsim::channel::{stream_rng, Antennas, CsiMode};
use fjsim::conventional::{average_secrecy, ExhaustiveSearch, DEFAULT_GRID_STEPS};
use fjsim::harness::paired_ensemble;

fn main() -> fjsim::Result<()> {
    let ant = Antennas::new(4, 2, 2)?;
    let mut g = LcdGenerator::new(ant, &LcdConfig::default(), &mut stream_rng(0, 0))?;
    let losses = g.train(&LcdTrainConfig { snr_db: (5.0, 25.0), ..LcdTrainConfig::default() })?;
    let tail = &losses[losses.len() - 100..];
    println!("final training loss {:.4}", tail.iter().sum::<f64>() / tail.len() as f64);

    let ens = paired_ensemble(ant, CsiMode::Perfect, 11, 3000)?;
    for snr in [5.0, 15.0, 25.0] {
        let p = 10f64.powf(snr / 10.0);
        let ours = average_secrecy(&g, &ens, p)?;
        let best = average_secrecy(&ExhaustiveSearch::fit(&ens, p, DEFAULT_GRID_STEPS)?, &ens, p)?;
        println!("{snr:>4} dB: generator {:.4}  exhaustive {:.4}  ratio {:.3}", ours.mean, best.mean, ours.mean / best.mean);
    }
    Ok(())
}
