//! MINE on correlated Gaussian pairs against the closed-form information.

use fjsim::channel::stream_rng;
use fjsim::mine::{gaussian_mi_oracle, gaussian_pairs, MineEstimator};
use fjsim::neuralnet::AdamConfig;

fn main() -> fjsim::Result<()> {
    for rho in [0.0, 0.5, 0.9, 0.99] {
        let mut rng = stream_rng(1, 0);
        let (x, y) = gaussian_pairs(rho, 20_000, &mut rng);
        let (xt, yt) = gaussian_pairs(rho, 20_000, &mut rng);
        let mut est = MineEstimator::new(1, 1, 64, &mut stream_rng(1, 1))?;
        est.fit(&x, &y, 1000, 512, &AdamConfig::default(), &mut rng)?;
        let v = est.dv_estimate(&xt, &yt)?;
        println!("rho {rho:<4}: estimate {:.4}  exact {:.4} nats", v.value, gaussian_mi_oracle(rho)?);
    }
    Ok(())
}
