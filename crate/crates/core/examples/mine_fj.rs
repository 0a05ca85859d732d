//! MINE-based jamming on one channel instance: alternating estimator and
//! encoder updates with held-out tracking.

use fjsim::channel::Antennas;
use fjsim::mine::{train_mine_fj, MineFjConfig, StopRule};

fn main() -> fjsim::Result<()> {
    let cfg = MineFjConfig {
        antennas: Antennas::new(6, 2, 2)?,
        snr_db: 15.0,
        iterations: 150,
        stop: StopRule::None,
        ..MineFjConfig::default()
    };
    let out = train_mine_fj(&cfg)?;
    println!("iter   I_AB    I_AE    GSC");
    for h in out.history.iter().step_by(10) {
        println!("{:>4}  {:.4}  {:.4}  {:.4}", h.iteration, h.i_ab, h.i_ae, h.gsc);
    }
    println!("best iteration {}; raw stop rule would fire at {:?}", out.best_iteration, out.raw_stop);
    Ok(())
}
