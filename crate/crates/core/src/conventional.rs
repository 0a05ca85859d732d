//! Closed-form secrecy machinery for nullspace friendly jamming: FJ design,
//! SVD precoding with water-filling, secrecy rates under perfect and
//! imperfect CSI, the guaranteed secrecy rate, and the exhaustive power-split
//! baseline. All rates are in nats.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{complex_normal_vec, ChannelDraw, CsiMode, CsiState};
use crate::error::{Error, Result};
use crate::linalg::{self, logdet_hpd, nullspace_basis, ComplexMatrix, DEFAULT_RANK_TOL};

/// Default number of power-split grid points on `[0, 1]`.
pub const DEFAULT_GRID_STEPS: usize = 101;

/// Nullspace jamming design: `w = Z v`, `v ~ CN(0, σ_v² I)`.
#[derive(Debug, Clone)]
pub struct FjDesign {
    /// `N_t × N_FJ`, orthonormal columns spanning `null(H̃†)`.
    pub z: ComplexMatrix,
    pub sigma_v2: f64,
    pub n_fj: usize,
    /// Set when the design channel has no nullspace, so no jamming is possible.
    pub disabled: bool,
}

impl FjDesign {
    /// Same basis, different jamming variance.
    pub fn with_variance(&self, sigma_v2: f64) -> Self {
        Self {
            sigma_v2,
            ..self.clone()
        }
    }

    /// Jamming covariance `σ_v² Z Z†` (`N_t × N_t`).
    pub fn covariance(&self) -> ComplexMatrix {
        if self.n_fj == 0 || self.sigma_v2 == 0.0 {
            return ComplexMatrix::zeros(self.z.rows(), self.z.rows());
        }
        (&self.z * &self.z.adjoint()).scale(self.sigma_v2)
    }
}

/// Builds the FJ precoder from the transmitter's channel estimate.
pub fn design_fj(h_hat: &ComplexMatrix, sigma_v2: f64) -> Result<FjDesign> {
    if !(sigma_v2 >= 0.0) {
        return Err(Error::Argument(format!("jamming variance must be >= 0, got {sigma_v2}")));
    }
    let z = nullspace_basis(&h_hat.adjoint(), DEFAULT_RANK_TOL)?;
    let n_fj = z.cols();
    Ok(FjDesign {
        z,
        sigma_v2,
        n_fj,
        disabled: n_fj == 0,
    })
}

/// One jamming vector `w = Z v`. Zero when the design is disabled.
pub fn sample_fj<R: rand::Rng + ?Sized>(design: &FjDesign, rng: &mut R) -> Vec<Complex64> {
    if design.n_fj == 0 {
        return vec![Complex64::ZERO; design.z.rows()];
    }
    let v = complex_normal_vec(rng, design.n_fj, design.sigma_v2);
    design.z.mul_vec(&v).expect("basis and coefficient dimensions agree")
}

/// Eavesdropper interference-plus-noise covariance
/// `K = σ_v² (G†Z)(G†Z)† + σ_e² I`.
pub fn eve_noise_cov(g: &ComplexMatrix, design: &FjDesign, sigma_e2: f64) -> Result<ComplexMatrix> {
    if g.rows() != design.z.rows() {
        return Err(Error::Argument(format!(
            "eavesdropper channel has {} transmit rows, design has {}",
            g.rows(),
            design.z.rows()
        )));
    }
    let ne = g.cols();
    let noise = ComplexMatrix::identity(ne).scale(sigma_e2);
    if design.n_fj == 0 || design.sigma_v2 == 0.0 {
        return Ok(noise);
    }
    let b = &g.adjoint() * &design.z;
    Ok(&(&b * &b.adjoint()).scale(design.sigma_v2) + &noise)
}

/// Per-stream powers from water-filling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    /// `σ_{r,i}²`, one entry per precoded stream.
    pub per_stream: Vec<f64>,
    pub p_info: f64,
    pub p_total: f64,
    /// Water level `μ`; streams get `max(0, μ − 1/g_i)`.
    pub water_level: f64,
}

impl PowerAllocation {
    /// All power on nothing; used for the no-transmission corner.
    pub fn silent(streams: usize, p_total: f64) -> Self {
        Self {
            per_stream: vec![0.0; streams],
            p_info: 0.0,
            p_total,
            water_level: 0.0,
        }
    }

    /// Pads with zero-power streams up to `n`.
    pub fn padded(&self, n: usize) -> Vec<f64> {
        let mut p = self.per_stream.clone();
        p.resize(n.max(p.len()), 0.0);
        p
    }
}

/// Maximizes `Σ ln(1 + g_i p_i)` subject to `Σ p_i = p_info`, `p_i ≥ 0`.
/// Zero gains receive no power.
pub fn waterfill(gains: &[f64], p_info: f64) -> Result<PowerAllocation> {
    if gains.is_empty() {
        return Err(Error::Argument("water-filling needs at least one gain".into()));
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::Argument(format!("gains must be finite and >= 0, got {g}")));
    }
    if !(p_info >= 0.0) {
        return Err(Error::Argument(format!("power must be >= 0, got {p_info}")));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut per_stream = vec![0.0; gains.len()];
    if order.is_empty() || p_info == 0.0 {
        return Ok(PowerAllocation {
            per_stream,
            p_info,
            p_total: p_info,
            water_level: 0.0,
        });
    }
    // Largest active set whose weakest member still sits below the water line.
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (k, &i) in order.iter().enumerate() {
        let inv = 1.0 / gains[i];
        let candidate = (p_info + inv_sum + inv) / (k + 1) as f64;
        if candidate <= inv {
            break;
        }
        inv_sum += inv;
        level = candidate;
        active = k + 1;
    }
    for &i in &order[..active] {
        per_stream[i] = (level - 1.0 / gains[i]).max(0.0);
    }
    Ok(PowerAllocation {
        per_stream,
        p_info,
        p_total: p_info,
        water_level: level,
    })
}

/// `Σ ln(1 + g_i p_i)`.
pub fn waterfill_objective(gains: &[f64], powers: &[f64]) -> f64 {
    gains.iter().zip(powers).map(|(g, p)| (g * p).ln_1p()).sum()
}

/// Legitimate, eavesdropper, and secrecy rate for one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecrecySample {
    pub r_ab: f64,
    pub r_ae: f64,
    pub r_s: f64,
}

impl SecrecySample {
    pub fn new(r_ab: f64, r_ae: f64) -> Self {
        Self {
            r_ab,
            r_ae,
            r_s: (r_ab - r_ae).max(0.0),
        }
    }

    /// Unclamped `r_ab − r_ae`.
    pub fn margin(&self) -> f64 {
        self.r_ab - self.r_ae
    }
}

/// SVD precoder for `H† = U Γ V†`: `s = V r`.
#[derive(Debug, Clone)]
pub struct SvdPrecoder {
    /// `N_t × N_t` unitary.
    pub v: ComplexMatrix,
    /// `γ_i²` for the `min(N_t, N_r)` streams, descending.
    pub gains: Vec<f64>,
}

impl SvdPrecoder {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        let dec = linalg::svd(&h.adjoint())?;
        Ok(Self {
            v: dec.v,
            gains: dec.sigma.iter().map(|s| s * s).collect(),
        })
    }

    /// `Q_s = V Q_r V†` with `Q_r = diag(per_stream)` padded to `N_t`.
    pub fn signal_covariance(&self, alloc: &PowerAllocation) -> ComplexMatrix {
        let nt = self.v.rows();
        let p = alloc.padded(nt);
        let vp = ComplexMatrix::from_fn(nt, nt, |i, j| self.v[(i, j)] * p[j]);
        &vp * &self.v.adjoint()
    }

    /// Water-filling on `γ_i² / σ_b²`.
    pub fn allocate(&self, p_info: f64, sigma_b2: f64) -> Result<PowerAllocation> {
        let scaled: Vec<f64> = self.gains.iter().map(|g| g / sigma_b2).collect();
        waterfill(&scaled, p_info)
    }
}

fn check_noise(var: f64, what: &str) -> Result<()> {
    if var > 0.0 && var.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} noise variance must be positive, got {var}")))
    }
}

/// Rate of the link `y = C† (s + w) + n` with signal covariance `q_s`, jamming
/// covariance `jam`, and `n ~ CN(0, noise I)`:
/// `ln det(noise I + C†(jam + q_s)C) − ln det(noise I + C† jam C)`.
pub fn link_rate(c: &ComplexMatrix, q_s: &ComplexMatrix, jam: &ComplexMatrix, noise: f64) -> Result<f64> {
    let n = c.cols();
    let ch = c.adjoint();
    let interference = &(&(&ch * jam) * c) + &ComplexMatrix::identity(n).scale(noise);
    let total = &interference + &(&(&ch * q_s) * c);
    Ok(logdet_hpd(&total)? - logdet_hpd(&interference)?)
}

/// Secrecy with arbitrary signal and jamming covariances, evaluated on the
/// true channels of `draw`. Any jamming that leaks into `H†` acts as noise at
/// the receiver.
pub fn secrecy_with_covariances(draw: &ChannelDraw, q_s: &ComplexMatrix, jam: &ComplexMatrix) -> Result<SecrecySample> {
    check_noise(draw.sigma_b2, "receiver")?;
    check_noise(draw.sigma_e2, "eavesdropper")?;
    let r_ab = link_rate(&draw.h, q_s, jam, draw.sigma_b2)?;
    let r_ae = link_rate(&draw.g, q_s, jam, draw.sigma_e2)?;
    Ok(SecrecySample::new(r_ab, r_ae))
}

/// Direct evaluation from the signal covariance:
/// `ln det(I + H†Q_sH/σ_b²) − ln det(K + G†Q_sG)/det(K)`.
pub fn secrecy_rate_direct(draw: &ChannelDraw, q_s: &ComplexMatrix, design: &FjDesign) -> Result<SecrecySample> {
    check_noise(draw.sigma_b2, "receiver")?;
    let nr = draw.h.cols();
    let hq = &(&draw.h.adjoint() * q_s) * &draw.h;
    let r_ab = logdet_hpd(&(&ComplexMatrix::identity(nr) + &hq.scale(1.0 / draw.sigma_b2)))?;
    let r_ae = eavesdropper_rate(draw, q_s, design)?;
    Ok(SecrecySample::new(r_ab, r_ae))
}

fn eavesdropper_rate(draw: &ChannelDraw, q_s: &ComplexMatrix, design: &FjDesign) -> Result<f64> {
    let k = eve_noise_cov(&draw.g, design, draw.sigma_e2)?;
    let f = &(&draw.g.adjoint() * q_s) * &draw.g;
    let logdet_k = logdet_hpd(&k).map_err(|e| match e {
        Error::Domain(msg) => Error::Domain(format!("eavesdropper covariance singular: {msg}")),
        other => other,
    })?;
    Ok(logdet_hpd(&(&k + &f))? - logdet_k)
}

/// Secrecy rate with SVD precoding on the true channel (perfect CSI). The
/// legitimate term is the diagonal form `Σ ln(1 + γ_i² p_i / σ_b²)`.
pub fn secrecy_rate_perfect(draw: &ChannelDraw, alloc: &PowerAllocation, design: &FjDesign) -> Result<SecrecySample> {
    check_noise(draw.sigma_b2, "receiver")?;
    let pre = SvdPrecoder::new(&draw.h)?;
    let p = alloc.padded(pre.gains.len());
    let r_ab: f64 = pre
        .gains
        .iter()
        .zip(&p)
        .map(|(g, p)| (g * p / draw.sigma_b2).ln_1p())
        .sum();
    let q_s = pre.signal_covariance(alloc);
    let r_ae = eavesdropper_rate(draw, &q_s, design)?;
    Ok(SecrecySample::new(r_ab, r_ae))
}

/// Secrecy rate when precoder and FJ basis come from the estimate in `csi`
/// while the signal propagates over the true `draw.h`. Jamming leaking through
/// the estimation error, `H†Z = −ΔH†Z`, is noise at the receiver.
pub fn secrecy_rate_imcsi(
    draw: &ChannelDraw,
    csi: &CsiState,
    alloc: &PowerAllocation,
    design: &FjDesign,
) -> Result<SecrecySample> {
    if csi.mode == CsiMode::Unknown {
        return Err(Error::Argument("imperfect-CSI secrecy needs a channel estimate".into()));
    }
    check_noise(draw.sigma_b2, "receiver")?;
    let h_hat = csi.estimate()?;
    let pre = SvdPrecoder::new(h_hat)?;
    let q_s = pre.signal_covariance(alloc);
    let nr = draw.h.cols();
    let d = if design.n_fj == 0 || design.sigma_v2 == 0.0 {
        ComplexMatrix::identity(nr).scale(draw.sigma_b2)
    } else {
        let leak = &draw.h.adjoint() * &design.z;
        &(&leak * &leak.adjoint()).scale(design.sigma_v2) + &ComplexMatrix::identity(nr).scale(draw.sigma_b2)
    };
    let signal = &(&draw.h.adjoint() * &q_s) * &draw.h;
    let r_ab = logdet_hpd(&(&d + &signal))? - logdet_hpd(&d)?;
    let r_ae = eavesdropper_rate(draw, &q_s, design)?;
    Ok(SecrecySample::new(r_ab, r_ae))
}

/// Guaranteed secrecy rate against a noiseless eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gsc {
    /// `max(0, i_ab − R_AE,max)`.
    pub value: f64,
    /// Worst-case eavesdropper rate.
    pub r_ae_max: f64,
    /// The jamming covariance at the eavesdropper was singular and the rate
    /// was taken on its column space (pseudo-determinant).
    pub pseudo_determinant: bool,
}

/// `i_ab − [ln det(K' + G†Q_sG) − ln det K']`, `K' = σ_v² (G†Z)(G†Z)†`,
/// clamped at zero.
pub fn gsc(i_ab: f64, g: &ComplexMatrix, design: &FjDesign, q_s: &ComplexMatrix) -> Result<Gsc> {
    if !(i_ab >= 0.0) {
        return Err(Error::Argument(format!("legitimate information must be >= 0, got {i_ab}")));
    }
    let f = &(&g.adjoint() * q_s) * g;
    if design.n_fj == 0 || design.sigma_v2 == 0.0 {
        // No jamming reaches the eavesdropper: its noiseless rate is unbounded
        // unless it receives no signal at all.
        let r_ae_max = if f.frobenius_norm() == 0.0 { 0.0 } else { f64::INFINITY };
        return Ok(Gsc {
            value: (i_ab - r_ae_max).max(0.0),
            r_ae_max,
            pseudo_determinant: true,
        });
    }
    let b = &g.adjoint() * &design.z;
    let k = (&b * &b.adjoint()).scale(design.sigma_v2);
    let dec = linalg::svd(&b)?;
    let rank = dec.rank(DEFAULT_RANK_TOL);
    let (r_ae_max, pseudo) = if rank == g.cols() {
        (logdet_hpd(&(&k + &f))? - logdet_hpd(&k)?, false)
    } else if rank == 0 {
        (if f.frobenius_norm() == 0.0 { 0.0 } else { f64::INFINITY }, true)
    } else {
        let cols: Vec<usize> = (0..rank).collect();
        let p = dec.u.select_columns(&cols);
        let pa = p.adjoint();
        let kp = &(&pa * &k) * &p;
        let tp = &(&pa * &(&k + &f)) * &p;
        (logdet_hpd(&tp)? - logdet_hpd(&kp)?, true)
    };
    Ok(Gsc {
        value: (i_ab - r_ae_max).max(0.0),
        r_ae_max,
        pseudo_determinant: pseudo,
    })
}

/// Mean and standard error of a sample of secrecy rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecrecyStats {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl SecrecyStats {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Argument("statistics of an empty sample".into()));
        }
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let std_error = if n < 2 {
            0.0
        } else {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        };
        Ok(Self { mean, std_error, n })
    }
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Precoded FJ design derived once per realization and reused across power
/// splits.
#[derive(Debug, Clone)]
pub struct NullspaceScheme {
    pre: SvdPrecoder,
    basis: FjDesign,
}

impl NullspaceScheme {
    pub fn prepare(csi: &CsiState) -> Result<Self> {
        let h_hat = csi.estimate()?;
        Ok(Self {
            pre: SvdPrecoder::new(h_hat)?,
            basis: design_fj(h_hat, 0.0)?,
        })
    }

    pub fn n_fj(&self) -> usize {
        self.basis.n_fj
    }

    /// Allocation and design for a fraction `phi` of `p_total` on information.
    /// The rest is spread uniformly over the jamming dimensions.
    pub fn split(&self, p_total: f64, phi: f64, sigma_b2: f64) -> Result<(PowerAllocation, FjDesign)> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::Argument(format!("power split must lie in [0, 1], got {phi}")));
        }
        let mut alloc = self.pre.allocate(phi * p_total, sigma_b2)?;
        alloc.p_total = p_total;
        let sigma_v2 = if self.basis.n_fj == 0 {
            0.0
        } else {
            (1.0 - phi) * p_total / self.basis.n_fj as f64
        };
        Ok((alloc, self.basis.with_variance(sigma_v2)))
    }

    pub fn evaluate(&self, draw: &ChannelDraw, p_total: f64, phi: f64) -> Result<SecrecySample> {
        let (alloc, design) = self.split(p_total, phi, draw.sigma_b2)?;
        let q_s = self.pre.signal_covariance(&alloc);
        let nr = draw.h.cols();
        let jam = design.covariance();
        let leak = &(&draw.h.adjoint() * &jam) * &draw.h;
        let d = &leak + &ComplexMatrix::identity(nr).scale(draw.sigma_b2);
        let signal = &(&draw.h.adjoint() * &q_s) * &draw.h;
        let r_ab = logdet_hpd(&(&d + &signal))? - logdet_hpd(&d)?;
        let r_ae = eavesdropper_rate(draw, &q_s, &design)?;
        Ok(SecrecySample::new(r_ab, r_ae))
    }
}

/// A channel realization together with what the transmitter knows about it.
#[derive(Debug, Clone)]
pub struct Realization {
    pub draw: ChannelDraw,
    pub csi: CsiState,
}

impl Realization {
    pub fn perfect(draw: ChannelDraw) -> Self {
        let csi = CsiState::perfect(&draw);
        Self { draw, csi }
    }
}

/// Anything that turns a realization and a power budget into a secrecy sample.
pub trait SecrecyScheme: Sync {
    fn name(&self) -> &str;
    fn secrecy(&self, real: &Realization, p_total: f64) -> Result<SecrecySample>;
}

/// Nullspace FJ with SVD precoding and a fixed power split.
#[derive(Debug, Clone, Copy)]
pub struct FixedSplit {
    pub phi: f64,
}

impl SecrecyScheme for FixedSplit {
    fn name(&self) -> &str {
        "nullspace_fixed"
    }

    fn secrecy(&self, real: &Realization, p_total: f64) -> Result<SecrecySample> {
        NullspaceScheme::prepare(&real.csi)?.evaluate(&real.draw, p_total, self.phi)
    }
}

/// Mean clamped secrecy over the ensemble, evaluated in parallel and reduced
/// in ensemble order.
pub fn average_secrecy(scheme: &dyn SecrecyScheme, ensemble: &[Realization], p_total: f64) -> Result<SecrecyStats> {
    let rates: Vec<f64> = ensemble
        .par_iter()
        .map(|r| scheme.secrecy(r, p_total).map(|s| s.r_s))
        .collect::<Result<_>>()?;
    SecrecyStats::from_samples(&rates)
}

/// Result of the grid search over power splits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSplit {
    pub phi_star: f64,
    pub mean_rs: f64,
    /// `(phi, mean r_s)` for every grid point.
    pub grid: Vec<(f64, f64)>,
}

/// Grid search for the information-power fraction maximizing mean secrecy.
/// Ties resolve to the smallest `phi`.
pub fn exhaustive_power_split(ensemble: &[Realization], p_total: f64, grid_steps: usize) -> Result<PowerSplit> {
    if grid_steps < 2 {
        return Err(Error::Argument(format!("grid needs at least 2 points, got {grid_steps}")));
    }
    if ensemble.is_empty() {
        return Err(Error::Argument("empty ensemble".into()));
    }
    let phis: Vec<f64> = (0..grid_steps).map(|i| i as f64 / (grid_steps - 1) as f64).collect();
    // Rows: draws; columns: grid points.
    let table: Vec<Vec<f64>> = ensemble
        .par_iter()
        .map(|r| {
            let scheme = NullspaceScheme::prepare(&r.csi)?;
            phis.iter()
                .map(|&phi| scheme.evaluate(&r.draw, p_total, phi).map(|s| s.r_s))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut grid = Vec::with_capacity(grid_steps);
    let mut column = vec![0.0; ensemble.len()];
    for (k, &phi) in phis.iter().enumerate() {
        for (c, row) in column.iter_mut().zip(&table) {
            *c = row[k];
        }
        grid.push((phi, pairwise_sum(&column) / ensemble.len() as f64));
    }
    let (phi_star, mean_rs) = grid
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (phi, m)| if m > best.1 { (phi, m) } else { best });
    Ok(PowerSplit { phi_star, mean_rs, grid })
}

/// Nullspace FJ whose power split was chosen by [`exhaustive_power_split`].
#[derive(Debug, Clone)]
pub struct ExhaustiveSearch {
    pub split: PowerSplit,
}

impl ExhaustiveSearch {
    pub fn fit(ensemble: &[Realization], p_total: f64, grid_steps: usize) -> Result<Self> {
        Ok(Self {
            split: exhaustive_power_split(ensemble, p_total, grid_steps)?,
        })
    }
}

impl SecrecyScheme for ExhaustiveSearch {
    fn name(&self) -> &str {
        "conventional_exhaustive"
    }

    fn secrecy(&self, real: &Realization, p_total: f64) -> Result<SecrecySample> {
        NullspaceScheme::prepare(&real.csi)?.evaluate(&real.draw, p_total, self.split.phi_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{stream_rng, Antennas};

    fn draw(seed: u64, nt: usize, nr: usize, ne: usize) -> ChannelDraw {
        ChannelDraw::sample(Antennas::new(nt, nr, ne).unwrap(), 1.0, 1.0, &mut stream_rng(seed, 0))
    }

    #[test]
    fn design_has_expected_dimension() {
        let d = draw(1, 4, 2, 2);
        let fj = design_fj(&d.h, 1.0).unwrap();
        assert_eq!(fj.n_fj, 2);
        assert!(!fj.disabled);
        assert!((&d.h.adjoint() * &fj.z).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn square_channel_disables_jamming() {
        let d = draw(2, 2, 2, 2);
        let fj = design_fj(&d.h, 1.0).unwrap();
        assert_eq!(fj.n_fj, 0);
        assert!(fj.disabled);
        let w = sample_fj(&fj, &mut stream_rng(0, 0));
        assert!(w.iter().all(|z| *z == Complex64::ZERO));
    }

    #[test]
    fn zero_variance_jamming_is_silent() {
        let d = draw(3, 4, 2, 2);
        let fj = design_fj(&d.h, 0.0).unwrap();
        let w = sample_fj(&fj, &mut stream_rng(0, 0));
        assert!(w.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn eve_covariance_trivial_cases() {
        let d = draw(4, 2, 2, 3);
        let fj = design_fj(&d.h, 5.0).unwrap();
        assert_eq!(fj.n_fj, 0);
        let k = eve_noise_cov(&d.g, &fj, 1.0).unwrap();
        assert_eq!(k, ComplexMatrix::identity(3));

        let d = draw(5, 4, 2, 2);
        let fj = design_fj(&d.h, 5.0).unwrap();
        let k = eve_noise_cov(&ComplexMatrix::zeros(4, 2), &fj, 0.5).unwrap();
        assert!((&k - &ComplexMatrix::identity(2).scale(0.5)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn waterfill_equal_gains() {
        let a = waterfill(&[2.0, 2.0, 2.0], 3.0).unwrap();
        for p in &a.per_stream {
            assert!((p - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn waterfill_two_streams() {
        let a = waterfill(&[4.0, 1.0], 1.0).unwrap();
        assert!((a.per_stream[0] - 0.875).abs() < 1e-15);
        assert!((a.per_stream[1] - 0.125).abs() < 1e-15);
        assert!((a.water_level - 1.125).abs() < 1e-15);
    }

    #[test]
    fn waterfill_drops_weak_stream() {
        let a = waterfill(&[10.0, 0.01], 0.05).unwrap();
        assert_eq!(a.per_stream[1], 0.0);
        assert!((a.per_stream[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn waterfill_argument_errors() {
        assert!(waterfill(&[], 1.0).is_err());
        assert!(waterfill(&[1.0, -1.0], 1.0).is_err());
        assert!(waterfill(&[1.0], -1.0).is_err());
        let a = waterfill(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(a.per_stream, vec![0.0, 0.0]);
    }

    #[test]
    fn no_power_means_no_secrecy() {
        let d = draw(6, 4, 2, 2);
        let fj = design_fj(&d.h, 1.0).unwrap();
        let s = secrecy_rate_perfect(&d, &PowerAllocation::silent(4, 1.0), &fj).unwrap();
        assert_eq!(s.r_ab, 0.0);
        assert_eq!(s.r_s, 0.0);
    }

    #[test]
    fn absent_eavesdropper_keeps_full_rate() {
        let d = draw(7, 4, 2, 2).without_eavesdropper();
        let fj = design_fj(&d.h, 1.0).unwrap();
        let alloc = SvdPrecoder::new(&d.h).unwrap().allocate(5.0, 1.0).unwrap();
        let s = secrecy_rate_perfect(&d, &alloc, &fj).unwrap();
        assert!(s.r_ae.abs() < 1e-12);
        assert!((s.r_s - s.r_ab).abs() < 1e-12);
    }

    #[test]
    fn imcsi_with_perfect_estimate_matches_perfect() {
        let d = draw(8, 4, 2, 2);
        let fj = design_fj(&d.h, 2.0).unwrap();
        let alloc = SvdPrecoder::new(&d.h).unwrap().allocate(5.0, 1.0).unwrap();
        let a = secrecy_rate_perfect(&d, &alloc, &fj).unwrap();
        let b = secrecy_rate_imcsi(&d, &CsiState::perfect(&d), &alloc, &fj).unwrap();
        assert!((a.r_ab - b.r_ab).abs() < 1e-10);
        assert!((a.r_ae - b.r_ae).abs() < 1e-10);
    }

    #[test]
    fn imcsi_without_jamming_is_plain_rate() {
        let mut rng = stream_rng(9, 0);
        let d = draw(9, 4, 2, 2);
        let csi = CsiState::observe(&d, CsiMode::Statistical { rho_e2: 0.01 }, &mut rng).unwrap();
        let fj = design_fj(csi.estimate().unwrap(), 0.0).unwrap();
        let pre = SvdPrecoder::new(csi.estimate().unwrap()).unwrap();
        let alloc = pre.allocate(5.0, 1.0).unwrap();
        let s = secrecy_rate_imcsi(&d, &csi, &alloc, &fj).unwrap();
        let q_s = pre.signal_covariance(&alloc);
        let plain = secrecy_rate_direct(&d, &q_s, &fj).unwrap();
        assert!((s.r_ab - plain.r_ab).abs() < 1e-10);
        assert!(secrecy_rate_imcsi(&d, &CsiState { mode: CsiMode::Unknown, h_hat: None }, &alloc, &fj).is_err());
    }

    #[test]
    fn gsc_trivial_cases() {
        let d = draw(10, 4, 2, 2);
        let fj = design_fj(&d.h, 1.0).unwrap();
        let zero = ComplexMatrix::zeros(4, 4);
        let g = gsc(1.5, &d.g, &fj, &zero).unwrap();
        assert!((g.value - 1.5).abs() < 1e-12);
        let q = SvdPrecoder::new(&d.h).unwrap();
        let q_s = q.signal_covariance(&q.allocate(1.0, 1.0).unwrap());
        assert_eq!(gsc(0.0, &d.g, &fj, &q_s).unwrap().value, 0.0);
        let loud = gsc(1.5, &d.g, &fj.with_variance(1e12), &q_s).unwrap();
        assert!((loud.value - 1.5).abs() < 1e-9);
    }

    #[test]
    fn gsc_pseudo_determinant_when_eve_outnumbers_jamming() {
        let d = draw(11, 4, 3, 3);
        let fj = design_fj(&d.h, 1.0).unwrap();
        assert_eq!(fj.n_fj, 1);
        let q = SvdPrecoder::new(&d.h).unwrap();
        let q_s = q.signal_covariance(&q.allocate(1.0, 1.0).unwrap());
        let g = gsc(2.0, &d.g, &fj, &q_s).unwrap();
        assert!(g.pseudo_determinant);
        assert!(g.r_ae_max.is_finite());
    }

    #[test]
    fn stats_basics() {
        let s = SecrecyStats::from_samples(&[0.7; 10]).unwrap();
        assert_eq!(s.mean, 0.7);
        assert_eq!(s.std_error, 0.0);
        let s = SecrecyStats::from_samples(&[0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!(SecrecyStats::from_samples(&[]).is_err());
    }

    #[test]
    fn exhaustive_without_eavesdropper_spends_everything_on_information() {
        let ens: Vec<Realization> = (0..5).map(|i| Realization::perfect(draw(100 + i, 4, 2, 2).without_eavesdropper())).collect();
        let split = exhaustive_power_split(&ens, 10.0, 11).unwrap();
        assert_eq!(split.phi_star, 1.0);
        assert!(exhaustive_power_split(&ens, 10.0, 1).is_err());
    }
}
