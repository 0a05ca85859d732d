//! Trains the autoencoder transceiver and prints receiver and eavesdropper
//! block error rates. Pass a step count to shorten training.

use fjsim::aefj::{AefjConfig, AefjModel, Receiver};
use fjsim::channel::Antennas;

fn main() -> fjsim::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let cfg = AefjConfig { steps, eve_extra_steps: steps / 5, ..AefjConfig::default() };
    let mut model = AefjModel::new(Antennas::new(4, 2, 2)?, cfg)?;
    for e in model.train()? {
        println!("epoch {:>3}: train {:.4}  validation {:.4}", e.epoch, e.train_loss, e.validation_loss);
    }
    let grid: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64).collect();
    let rx = model.eval_bler(&grid, 2000, Receiver::Rx, 1)?;
    let eve = model.eval_bler(&grid, 2000, Receiver::Eve, 1)?;
    println!("snr_db  bler_rx  bler_eve");
    for i in 0..grid.len() {
        println!("{:>6}  {:.4}   {:.4}", grid[i], rx.bler[i], eve.bler[i]);
    }
    println!("FJ leakage ||H^H w||/||w|| = {:.2e}", model.fj_leakage(200, 15.0, 2)?);
    Ok(())
}
