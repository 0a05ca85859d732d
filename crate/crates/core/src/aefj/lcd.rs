//! Learned capacity-driven FJ generator.
//!
//! A dense stack maps the transmitter's channel estimate (real and imaginary
//! parts, entry angles) and the SNR to a combining matrix `C` and a power
//! split logit. The precoder is `T = Ĥ C`; information gets `Q_s = φP·TT†/‖T‖²_F`
//! and jamming fills `null(T†)` isotropically with `σ_v² = (1−φ)P/N_FJ`. The
//! generator is trained without labels on `−R_s`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{stream_rng, streams, Antennas, ChannelDraw, CsiMode, CsiState};
use crate::conventional::{secrecy_with_covariances, Realization, SecrecySample, SecrecyScheme};
use crate::error::{Error, Result};
use crate::linalg::{inverse_hpd, logdet_hpd, nullspace_basis, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::neuralnet::{AdamConfig, LayerSpec, Network};
use ndarray::Array2;

/// Covariances produced by a precoder and power split.
#[derive(Debug, Clone)]
pub struct LcdCovariances {
    pub q_s: ComplexMatrix,
    /// `σ_v² (I − Π_T)`.
    pub jam: ComplexMatrix,
    pub sigma_v2: f64,
    pub n_fj: usize,
}

fn projector_complement(t: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let a_inv = inverse_hpd(&(&t.adjoint() * t))
        .map_err(|e| Error::Numerical(format!("precoder lost column rank: {e}")))?;
    let pi = &(t * &a_inv) * &t.adjoint();
    Ok((&ComplexMatrix::identity(t.rows()) - &pi, a_inv))
}

fn split_powers(nt: usize, ns: usize, p_total: f64, phi: f64) -> (f64, f64, usize) {
    let n_fj = nt.saturating_sub(ns);
    let sigma_v2 = if n_fj == 0 { 0.0 } else { (1.0 - phi) * p_total / n_fj as f64 };
    (phi * p_total, sigma_v2, n_fj)
}

/// Signal and jamming covariances for precoder `t` and split `phi`.
pub fn lcd_covariances(t: &ComplexMatrix, p_total: f64, phi: f64) -> Result<LcdCovariances> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Argument(format!("power split must lie in [0, 1], got {phi}")));
    }
    let fro2 = t.frobenius_norm().powi(2);
    if !(fro2 > 0.0) {
        return Err(Error::Numerical("zero precoder".into()));
    }
    let (p, sigma_v2, n_fj) = split_powers(t.rows(), t.cols(), p_total, phi);
    let q_s = (t * &t.adjoint()).scale(p / fro2);
    let jam = if sigma_v2 > 0.0 {
        projector_complement(t)?.0.scale(sigma_v2)
    } else {
        ComplexMatrix::zeros(t.rows(), t.rows())
    };
    Ok(LcdCovariances { q_s, jam, sigma_v2, n_fj })
}

/// Unclamped secrecy `R = r_ab − r_ae` of one realization and its gradient.
#[derive(Debug, Clone)]
pub struct LcdGradient {
    pub sample: SecrecySample,
    /// `r_ab − r_ae`, not clamped.
    pub margin: f64,
    /// `∂R/∂Re T + i ∂R/∂Im T`.
    pub grad_t: ComplexMatrix,
    pub grad_phi: f64,
}

/// `(ln det B, X B⁻¹ X†)` for `B = noise I + X† cov X`.
fn logdet_and_weight(x: &ComplexMatrix, cov: &ComplexMatrix, noise: f64) -> Result<(f64, ComplexMatrix)> {
    let xh = x.adjoint();
    let b = &(&(&xh * cov) * x) + &ComplexMatrix::identity(x.cols()).scale(noise);
    let ld = logdet_hpd(&b)?;
    let w = &(x * &inverse_hpd(&b)?) * &xh;
    Ok((ld, w))
}

/// Secrecy of precoder `t` with split `phi` on `draw`, with the analytic
/// gradient with respect to `t` and `phi`.
pub fn lcd_fj_gradient(t: &ComplexMatrix, draw: &ChannelDraw, p_total: f64, phi: f64) -> Result<LcdGradient> {
    let (nt, ns) = t.shape();
    if nt != draw.h.rows() {
        return Err(Error::Argument(format!("precoder has {nt} rows, channel has {} transmit antennas", draw.h.rows())));
    }
    let cov = lcd_covariances(t, p_total, phi)?;
    let (m, a_inv) = projector_complement(t)?;
    let fro2 = t.frobenius_norm().powi(2);
    let c = phi * p_total / fro2;
    let tt = t * &t.adjoint();
    let total = &cov.jam + &cov.q_s;

    let (l1, w1) = logdet_and_weight(&draw.h, &total, draw.sigma_b2)?;
    let (l2, w2) = logdet_and_weight(&draw.h, &cov.jam, draw.sigma_b2)?;
    let (l3, w3) = logdet_and_weight(&draw.g, &total, draw.sigma_e2)?;
    let (l4, w4) = logdet_and_weight(&draw.g, &cov.jam, draw.sigma_e2)?;
    let r_ab = l1 - l2;
    let r_ae = l3 - l4;

    let wq = &w1 - &w3;
    let wj = &(&(&w1 - &w2) - &w3) + &w4;
    let tr_q = (&wq * &tt).trace().re;
    let dr_dp = tr_q / fro2;
    let dr_dsv2 = (&wj * &m).trace().re;
    let grad_phi = if cov.n_fj == 0 {
        p_total * dr_dp
    } else {
        p_total * dr_dp - p_total / cov.n_fj as f64 * dr_dsv2
    };
    // Signal term, Frobenius normalization, and the jamming projector.
    let mut grad_t = &(&wq * t).scale(2.0 * c) - &t.scale(2.0 * c * tr_q / fro2);
    if cov.sigma_v2 > 0.0 {
        let proj = &(&(&m * &wj) * t) * &a_inv;
        grad_t = &grad_t - &proj.scale(2.0 * cov.sigma_v2);
    }
    debug_assert_eq!(grad_t.shape(), (nt, ns));
    Ok(LcdGradient {
        sample: SecrecySample::new(r_ab.max(0.0), r_ae.max(0.0)),
        margin: r_ab - r_ae,
        grad_t,
        grad_phi,
    })
}

/// Loss `−R` of one realization (unclamped).
pub fn lcd_fj_loss(t: &ComplexMatrix, draw: &ChannelDraw, p_total: f64, phi: f64) -> Result<f64> {
    let cov = lcd_covariances(t, p_total, phi)?;
    let r_ab = crate::conventional::link_rate(&draw.h, &cov.q_s, &cov.jam, draw.sigma_b2)?;
    let r_ae = crate::conventional::link_rate(&draw.g, &cov.q_s, &cov.jam, draw.sigma_e2)?;
    Ok(r_ae - r_ab)
}

/// Generator architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcdConfig {
    pub hidden: usize,
    /// Precoded streams `N_s`; defaults to `N_r`.
    pub streams: Option<usize>,
}

impl Default for LcdConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            streams: None,
        }
    }
}

/// Training schedule for the generator alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcdTrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub snr_db: (f64, f64),
    pub lr: f64,
    pub csi: CsiMode,
    pub seed: u64,
}

impl Default for LcdTrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch: 32,
            snr_db: (10.0, 25.0),
            lr: 1e-3,
            csi: CsiMode::Perfect,
            seed: 0,
        }
    }
}

/// One generator decision.
#[derive(Debug, Clone)]
pub struct LcdDesign {
    /// `N_t × N_s` precoder.
    pub t: ComplexMatrix,
    pub phi: f64,
    /// `N_t × N_FJ` orthonormal basis of `null(T†)`.
    pub z: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct LcdGenerator {
    net: Network,
    ant: Antennas,
    streams: usize,
}

const SNR_CENTER_DB: f64 = 17.5;
const SNR_SPAN_DB: f64 = 7.5;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LcdGenerator {
    pub fn new<R: Rng + ?Sized>(ant: Antennas, cfg: &LcdConfig, rng: &mut R) -> Result<Self> {
        let streams = cfg.streams.unwrap_or(ant.nr);
        if streams == 0 || streams > ant.nr || streams >= ant.nt + 1 {
            return Err(Error::Argument(format!(
                "stream count {streams} must lie in 1..={} (receive antennas) and not exceed {} transmit antennas",
                ant.nr, ant.nt
            )));
        }
        if cfg.hidden == 0 {
            return Err(Error::Argument("generator needs a hidden width >= 1".into()));
        }
        let input = 3 * ant.nt * ant.nr + 1;
        let output = 2 * ant.nr * streams + 1;
        let specs = [
            LayerSpec::Dense { input, output: cfg.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { input: cfg.hidden, output: cfg.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { input: cfg.hidden, output },
        ];
        let mut net = Network::new(&specs, rng)?;
        // Start from the matched precoder T = Ĥ and an even split.
        let last = specs.len() - 1;
        for j in 0..streams {
            net.params_mut()[last][1][(0, j * streams + j)] = 1.0;
        }
        Ok(Self { net, ant, streams })
    }

    pub fn antennas(&self) -> Antennas {
        self.ant
    }

    pub fn streams(&self) -> usize {
        self.streams
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Real and imaginary parts and angle of every entry of `h_hat`, then the
    /// normalized SNR.
    pub fn features(h_hat: &ComplexMatrix, snr_db: f64) -> Vec<f64> {
        let e = h_hat.entries();
        let mut f = Vec::with_capacity(3 * e.len() + 1);
        f.extend(e.iter().map(|z| z.re));
        f.extend(e.iter().map(|z| z.im));
        f.extend(e.iter().map(|z| z.im.atan2(z.re) / std::f64::consts::PI));
        f.push((snr_db - SNR_CENTER_DB) / SNR_SPAN_DB);
        f
    }

    fn feature_batch(&self, inputs: &[(&ComplexMatrix, f64)]) -> Result<Array2<f64>> {
        let width = 3 * self.ant.nt * self.ant.nr + 1;
        let mut x = Array2::zeros((inputs.len(), width));
        for (r, (h, snr)) in inputs.iter().enumerate() {
            if h.shape() != (self.ant.nt, self.ant.nr) {
                return Err(Error::Argument(format!(
                    "generator built for {}x{} channels, got {:?}",
                    self.ant.nt,
                    self.ant.nr,
                    h.shape()
                )));
            }
            for (c, v) in Self::features(h, *snr).into_iter().enumerate() {
                x[(r, c)] = v;
            }
        }
        Ok(x)
    }

    fn decode_row(&self, row: ndarray::ArrayView1<f64>, h_hat: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix, f64) {
        let (nr, ns) = (self.ant.nr, self.streams);
        let k = nr * ns;
        let c = ComplexMatrix::from_fn(nr, ns, |i, j| Complex64::new(row[i * ns + j], row[k + i * ns + j]));
        let t = h_hat * &c;
        (c, t, sigmoid(row[2 * k]))
    }

    fn finish(&self, t: ComplexMatrix, phi: f64) -> Result<LcdDesign> {
        let z = nullspace_basis(&t.adjoint(), DEFAULT_RANK_TOL)?;
        Ok(LcdDesign { t, phi, z })
    }

    /// Inference for a batch of `(estimate, snr_db)` pairs.
    pub fn design_batch(&self, inputs: &[(&ComplexMatrix, f64)]) -> Result<Vec<LcdDesign>> {
        let out = self.net.predict(&self.feature_batch(inputs)?)?;
        inputs
            .iter()
            .enumerate()
            .map(|(r, (h, _))| {
                let (_, t, phi) = self.decode_row(out.row(r), h);
                self.finish(t, phi)
            })
            .collect()
    }

    pub fn design(&self, h_hat: &ComplexMatrix, snr_db: f64) -> Result<LcdDesign> {
        Ok(self.design_batch(&[(h_hat, snr_db)])?.remove(0))
    }

    /// Training forward pass: designs for the batch plus the gradient of
    /// `−mean R` with respect to the network output. Call
    /// [`LcdGenerator::apply`] afterwards to update.
    pub fn forward_train(&mut self, batch: &[(&ChannelDraw, &ComplexMatrix, f64)]) -> Result<(Vec<LcdDesign>, Array2<f64>, f64)> {
        let inputs: Vec<(&ComplexMatrix, f64)> = batch.iter().map(|(_, h, s)| (*h, *s)).collect();
        let out = self.net.forward(&self.feature_batch(&inputs)?, true)?;
        let n = batch.len() as f64;
        let (nr, ns) = (self.ant.nr, self.streams);
        let k = nr * ns;
        let mut grad = Array2::zeros(out.raw_dim());
        let mut designs = Vec::with_capacity(batch.len());
        let mut loss = 0.0;
        for (r, (draw, h_hat, snr)) in batch.iter().enumerate() {
            let (_, t, phi) = self.decode_row(out.row(r), h_hat);
            let p_total = 10f64.powf(snr / 10.0) * draw.sigma_b2;
            let g = lcd_fj_gradient(&t, draw, p_total, phi)?;
            loss -= g.margin / n;
            let grad_c = &h_hat.adjoint() * &g.grad_t;
            for i in 0..nr {
                for j in 0..ns {
                    let z = grad_c[(i, j)];
                    grad[(r, i * ns + j)] = -z.re / n;
                    grad[(r, k + i * ns + j)] = -z.im / n;
                }
            }
            grad[(r, 2 * k)] = -g.grad_phi * phi * (1.0 - phi) / n;
            designs.push(self.finish(t, phi)?);
        }
        if !loss.is_finite() {
            return Err(Error::Divergence("generator loss became non-finite".into()));
        }
        Ok((designs, grad, loss))
    }

    /// Backpropagates the output gradient of the last [`forward_train`]
    /// and takes one Adam step.
    ///
    /// [`forward_train`]: LcdGenerator::forward_train
    pub fn apply(&mut self, grad: &Array2<f64>, adam: &AdamConfig) -> Result<()> {
        let (g, _) = self.net.backward(grad)?;
        self.net.adam_step(&g, adam)
    }

    /// Trains on fresh channel draws; returns the per-step loss `−mean R`.
    pub fn train(&mut self, cfg: &LcdTrainConfig) -> Result<Vec<f64>> {
        if cfg.batch == 0 || !(cfg.snr_db.0 <= cfg.snr_db.1) {
            return Err(Error::Argument("generator training needs batch >= 1 and an ordered SNR range".into()));
        }
        let adam = AdamConfig::with_lr(cfg.lr);
        let mut history = Vec::with_capacity(cfg.steps);
        for step in 0..cfg.steps {
            let mut rng = stream_rng(cfg.seed, streams::TRAINING + step as u64);
            let snr = rng.random_range(cfg.snr_db.0..=cfg.snr_db.1);
            let reals = sample_realizations(self.ant, cfg.csi, cfg.batch, &mut rng)?;
            let batch: Vec<_> = reals.iter().map(|r| (&r.draw, r.csi.h_hat.as_ref().expect("estimate present"), snr)).collect();
            let (_, grad, loss) = self.forward_train(&batch)?;
            self.apply(&grad, &adam)?;
            history.push(loss);
        }
        Ok(history)
    }

    /// Closed-form secrecy of the generator's decision on `real` at total
    /// power `p_total`.
    pub fn secrecy(&self, real: &Realization, p_total: f64) -> Result<SecrecySample> {
        let snr_db = 10.0 * (p_total / real.draw.sigma_b2).log10();
        let d = self.design(real.csi.estimate()?, snr_db)?;
        let cov = lcd_covariances(&d.t, p_total, d.phi)?;
        secrecy_with_covariances(&real.draw, &cov.q_s, &cov.jam)
    }
}

impl SecrecyScheme for LcdGenerator {
    fn name(&self) -> &str {
        "aefj"
    }

    fn secrecy(&self, real: &Realization, p_total: f64) -> Result<SecrecySample> {
        LcdGenerator::secrecy(self, real, p_total)
    }
}

/// Unit-noise realizations with CSI observed in `mode`.
pub fn sample_realizations<R: Rng + ?Sized>(ant: Antennas, mode: CsiMode, n: usize, rng: &mut R) -> Result<Vec<Realization>> {
    (0..n)
        .map(|_| {
            let draw = ChannelDraw::sample(ant, 1.0, 1.0, rng);
            let csi = if mode == CsiMode::Unknown {
                return Err(Error::Argument("the generator needs a channel estimate; unknown CSI is not supported".into()));
            } else {
                CsiState::observe(&draw, mode, rng)?
            };
            Ok(Realization { draw, csi })
        })
        .collect()
}
