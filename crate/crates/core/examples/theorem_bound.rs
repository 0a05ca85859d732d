//! Noiseless classifier training: ln M minus cross-entropy approaches the
//! mutual information and never exceeds the codeword entropy.

use fjsim::aefj::theorem::{train_noiseless, NoiselessConfig};

fn main() -> fjsim::Result<()> {
    let points = train_noiseless(&NoiselessConfig::default())?;
    println!("step   ce      lnM-ce  I(codeword)");
    for p in points.iter().step_by(3) {
        println!("{:>5}  {:.4}  {:.4}  {:.4}", p.step, p.ce, p.lower_bound, p.mutual_information);
    }
    Ok(())
}
