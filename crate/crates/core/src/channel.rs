//! Random channel generation, the imperfect-CSI error model, and AWGN.
//!
//! All randomness flows from [`stream_rng`]: a ChaCha8 generator keyed by a
//! master seed and selected by a 64-bit stream id. Monte Carlo draw `i`
//! always uses stream `i`, so results do not depend on how draws are spread
//! across workers.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

pub type SimRng = ChaCha8Rng;

/// Generator for `(seed, stream)`. Streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Offsets separating independent uses of the same draw index.
pub mod streams {
    pub const CHANNEL: u64 = 0;
    pub const TRAINING: u64 = 1 << 40;
    pub const EVALUATION: u64 = 2 << 40;
    pub const INIT: u64 = 3 << 40;
}

/// One circularly-symmetric complex Gaussian sample with `E|z|² = var`.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

pub fn complex_normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> Vec<Complex64> {
    (0..n).map(|_| complex_normal(rng, var)).collect()
}

/// `rows × cols` matrix with i.i.d. `CN(0, var)` entries.
pub fn complex_normal_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> ComplexMatrix {
    let entries = complex_normal_vec(rng, rows * cols, var);
    ComplexMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j])
}

/// Rayleigh channel `nt × ncols` with unit average entry gain.
pub fn sample_channel<R: rand::Rng + ?Sized>(nt: usize, ncols: usize, rng: &mut R) -> ComplexMatrix {
    sample_channel_with_gain(nt, ncols, 1.0, rng)
}

/// Rayleigh channel with `E|h|² = gain`.
pub fn sample_channel_with_gain<R: rand::Rng + ?Sized>(nt: usize, ncols: usize, gain: f64, rng: &mut R) -> ComplexMatrix {
    complex_normal_matrix(rng, nt, ncols, gain)
}

/// Estimate `h + Δh` with `Δh` i.i.d. `CN(0, rho_e2)`. Returns `(h_hat, dh)`.
pub fn perturb<R: rand::Rng + ?Sized>(h: &ComplexMatrix, rho_e2: f64, rng: &mut R) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if !(rho_e2 >= 0.0) {
        return Err(Error::Argument(format!("error variance must be >= 0, got {rho_e2}")));
    }
    if rho_e2 == 0.0 {
        return Ok((h.clone(), ComplexMatrix::zeros(h.rows(), h.cols())));
    }
    let dh = complex_normal_matrix(rng, h.rows(), h.cols(), rho_e2);
    Ok((h + &dh, dh))
}

/// `H† x + n` with `n ~ CN(0, sigma2 I)`.
pub fn transmit<R: rand::Rng + ?Sized>(h: &ComplexMatrix, x: &[Complex64], sigma2: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Argument(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let noise = complex_normal_vec(rng, h.cols(), sigma2);
    transmit_with_noise(h, x, &noise)
}

/// `H† x + noise` for a given noise realization.
pub fn transmit_with_noise(h: &ComplexMatrix, x: &[Complex64], noise: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != h.rows() {
        return Err(Error::Argument(format!(
            "transmit vector has {} entries, channel has {} transmit antennas",
            x.len(),
            h.rows()
        )));
    }
    if noise.len() != h.cols() {
        return Err(Error::Argument(format!(
            "noise vector has {} entries, channel has {} receive antennas",
            noise.len(),
            h.cols()
        )));
    }
    let mut y = vec![Complex64::ZERO; h.cols()];
    for (r, yr) in y.iter_mut().enumerate() {
        let mut acc = noise[r];
        for (t, xt) in x.iter().enumerate() {
            acc += h[(t, r)].conj() * xt;
        }
        *yr = acc;
    }
    Ok(y)
}

/// Antenna counts at the transmitter, receiver and eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Antennas {
    pub nt: usize,
    pub nr: usize,
    pub ne: usize,
}

impl Antennas {
    pub fn new(nt: usize, nr: usize, ne: usize) -> Result<Self> {
        if nt == 0 || nr == 0 || ne == 0 {
            return Err(Error::Argument(format!("antenna counts must be >= 1, got ({nt}, {nr}, {ne})")));
        }
        Ok(Self { nt, nr, ne })
    }
}

/// One realization of the legitimate (`h`, `nt × nr`) and eavesdropper
/// (`g`, `nt × ne`) channels plus receiver noise variances.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub h: ComplexMatrix,
    pub g: ComplexMatrix,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
}

impl ChannelDraw {
    pub fn sample<R: rand::Rng + ?Sized>(ant: Antennas, sigma_b2: f64, sigma_e2: f64, rng: &mut R) -> Self {
        let h = sample_channel(ant.nt, ant.nr, rng);
        let g = sample_channel(ant.nt, ant.ne, rng);
        Self { h, g, sigma_b2, sigma_e2 }
    }

    /// Draw number `index` of the ensemble keyed by `seed`.
    pub fn indexed(ant: Antennas, sigma_b2: f64, sigma_e2: f64, seed: u64, index: u64) -> Self {
        let mut rng = stream_rng(seed, streams::CHANNEL + index);
        Self::sample(ant, sigma_b2, sigma_e2, &mut rng)
    }

    pub fn antennas(&self) -> Antennas {
        Antennas {
            nt: self.h.rows(),
            nr: self.h.cols(),
            ne: self.g.cols(),
        }
    }

    /// Same draw with the eavesdropper channel zeroed.
    pub fn without_eavesdropper(&self) -> Self {
        Self {
            g: ComplexMatrix::zeros(self.g.rows(), self.g.cols()),
            ..self.clone()
        }
    }
}

/// How much the transmitter knows about the legitimate channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CsiMode {
    Perfect,
    /// Estimate corrupted by i.i.d. `CN(0, rho_e2)` errors with known variance.
    Statistical { rho_e2: f64 },
    Unknown,
}

impl CsiMode {
    pub fn error_variance(&self) -> f64 {
        match self {
            CsiMode::Statistical { rho_e2 } => *rho_e2,
            _ => 0.0,
        }
    }
}

/// Channel knowledge available to the transmitter and receiver.
#[derive(Debug, Clone)]
pub struct CsiState {
    pub mode: CsiMode,
    /// `None` in [`CsiMode::Unknown`].
    pub h_hat: Option<ComplexMatrix>,
}

impl CsiState {
    pub fn observe<R: rand::Rng + ?Sized>(draw: &ChannelDraw, mode: CsiMode, rng: &mut R) -> Result<Self> {
        let h_hat = match mode {
            CsiMode::Perfect => Some(draw.h.clone()),
            CsiMode::Statistical { rho_e2 } => {
                if !(rho_e2 > 0.0) {
                    return Err(Error::Argument(format!(
                        "statistical CSI needs a positive error variance, got {rho_e2}"
                    )));
                }
                Some(perturb(&draw.h, rho_e2, rng)?.0)
            }
            CsiMode::Unknown => None,
        };
        Ok(Self { mode, h_hat })
    }

    pub fn perfect(draw: &ChannelDraw) -> Self {
        Self {
            mode: CsiMode::Perfect,
            h_hat: Some(draw.h.clone()),
        }
    }

    pub fn estimate(&self) -> Result<&ComplexMatrix> {
        self.h_hat
            .as_ref()
            .ok_or_else(|| Error::Argument("no channel estimate available in unknown-CSI mode".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = sample_channel(4, 2, &mut stream_rng(7, 3));
        let b = sample_channel(4, 2, &mut stream_rng(7, 3));
        assert_eq!(a, b);
        let c = sample_channel(4, 2, &mut stream_rng(7, 4));
        assert_ne!(a, c);
    }

    #[test]
    fn indexed_draws_are_reproducible() {
        let ant = Antennas::new(4, 2, 2).unwrap();
        let a = ChannelDraw::indexed(ant, 1.0, 1.0, 11, 5);
        let b = ChannelDraw::indexed(ant, 1.0, 1.0, 11, 5);
        assert_eq!(a.h, b.h);
        assert_eq!(a.g, b.g);
        assert_eq!(a.antennas(), ant);
    }

    #[test]
    fn zero_error_perturbation_is_exact() {
        let mut rng = stream_rng(1, 0);
        let h = sample_channel(3, 2, &mut rng);
        let (h_hat, dh) = perturb(&h, 0.0, &mut rng).unwrap();
        assert_eq!(h_hat, h);
        assert_eq!(dh.frobenius_norm(), 0.0);
        assert!(perturb(&h, -1.0, &mut rng).is_err());
    }

    #[test]
    fn noiseless_identity_transmit() {
        let mut rng = stream_rng(2, 0);
        let x = complex_normal_vec(&mut rng, 3, 1.0);
        let y = transmit(&ComplexMatrix::identity(3), &x, 0.0, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn transmit_checks_dimensions() {
        let mut rng = stream_rng(2, 0);
        let h = ComplexMatrix::identity(3);
        assert!(transmit(&h, &[Complex64::ONE; 2], 1.0, &mut rng).is_err());
        assert!(transmit_with_noise(&h, &[Complex64::ONE; 3], &[Complex64::ONE; 2]).is_err());
    }

    #[test]
    fn csi_modes() {
        let mut rng = stream_rng(3, 0);
        let draw = ChannelDraw::sample(Antennas::new(4, 2, 2).unwrap(), 1.0, 1.0, &mut rng);
        let perfect = CsiState::observe(&draw, CsiMode::Perfect, &mut rng).unwrap();
        assert_eq!(perfect.estimate().unwrap(), &draw.h);
        let unknown = CsiState::observe(&draw, CsiMode::Unknown, &mut rng).unwrap();
        assert!(unknown.estimate().is_err());
        let stat = CsiState::observe(&draw, CsiMode::Statistical { rho_e2: 0.01 }, &mut rng).unwrap();
        assert_ne!(stat.estimate().unwrap(), &draw.h);
        assert!(CsiState::observe(&draw, CsiMode::Statistical { rho_e2: 0.0 }, &mut rng).is_err());
    }
}
