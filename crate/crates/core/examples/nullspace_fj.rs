//! Nullspace jamming on one channel draw: leakage into the legitimate link
//! and the secrecy rate with and without jamming.

use fjsim::channel::{stream_rng, Antennas, ChannelDraw};
use fjsim::conventional::{design_fj, sample_fj, NullspaceScheme, Realization};

fn main() -> fjsim::Result<()> {
    let ant = Antennas::new(4, 2, 2)?;
    let draw = ChannelDraw::indexed(ant, 1.0, 1.0, 7, 0);
    let design = design_fj(&draw.h, 1.0)?;
    let w = sample_fj(&design, &mut stream_rng(7, 1));
    let leak = draw.h.adjoint().mul_vec(&w)?;
    let norm = |v: &[num_complex::Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    println!("jamming dimensions: {}", design.n_fj);
    println!("||H^H w|| / ||w|| = {:.3e}", norm(&leak) / norm(&w));

    let real = Realization::perfect(draw);
    let scheme = NullspaceScheme::prepare(&real.csi)?;
    let p = 10f64.powf(15.0 / 10.0);
    for phi in [1.0, 0.75, 0.5] {
        let s = scheme.evaluate(&real.draw, p, phi)?;
        println!("phi {phi:.2}: R_AB {:.3}  R_AE {:.3}  R_s {:.3} nats", s.r_ab, s.r_ae, s.r_s);
    }
    Ok(())
}
