//! Autoencoder transceiver with a learned FJ generator.
//!
//! Per message block the generator picks a precoder `T` and split `φ` from
//! the channel estimate, the encoder maps the one-hot message to `N_s`
//! complex symbols `c`, and the transmitter sends
//! `x = κ (sqrt(φP/‖T‖²) T c + Z v)` with `Z` spanning `null(T†)` and `κ`
//! fixing the batch-average power at `P`. Receiver and eavesdropper equalize
//! with the pseudo-inverse of their effective channel and classify with
//! independently trained decoders.

mod lcd;
pub mod theorem;

pub use lcd::{
    lcd_covariances, lcd_fj_gradient, lcd_fj_loss, sample_realizations, LcdConfig, LcdCovariances, LcdDesign, LcdGenerator,
    LcdGradient, LcdTrainConfig,
};

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_normal_vec, stream_rng, streams, Antennas, CsiMode};
use crate::conventional::Realization;
use crate::error::{Error, Result};
use crate::linalg::{left_pinv, pinv, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::neuralnet::{
    cross_entropy, cross_entropy_grad, one_hot, save_checkpoint, soft_cross_entropy, soft_cross_entropy_grad, AdamConfig,
    LayerSpec, Network,
};

/// Training and architecture settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AefjConfig {
    /// Message alphabet size `M`.
    pub messages: usize,
    pub batch: usize,
    pub steps: usize,
    /// Steps averaged into one history entry.
    pub steps_per_epoch: usize,
    /// Weight of the FJ-suppression term.
    pub alpha: f64,
    pub snr_db: (f64, f64),
    pub lr: f64,
    /// When false all power goes to information (`φ = 1`).
    pub fj: bool,
    pub csi: CsiMode,
    pub encoder_hidden: usize,
    pub decoder_hidden: (usize, usize),
    pub generator: LcdConfig,
    /// Eavesdropper-only updates after joint training.
    pub eve_extra_steps: usize,
    pub seed: u64,
}

impl Default for AefjConfig {
    fn default() -> Self {
        Self {
            messages: 16,
            batch: 64,
            steps: 10_000,
            steps_per_epoch: 500,
            alpha: 0.5,
            snr_db: (10.0, 25.0),
            lr: 1e-3,
            fj: true,
            csi: CsiMode::Perfect,
            encoder_hidden: 64,
            decoder_hidden: (256, 128),
            generator: LcdConfig::default(),
            eve_extra_steps: 0,
            seed: 0,
        }
    }
}

impl AefjConfig {
    pub fn validate(&self) -> Result<()> {
        if self.messages < 2 {
            return Err(Error::Argument(format!("need at least 2 messages, got {}", self.messages)));
        }
        if self.batch < 2 {
            return Err(Error::Argument(format!("batch must be >= 2, got {}", self.batch)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Argument(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.snr_db.0 <= self.snr_db.1) {
            return Err(Error::Argument("training SNR range must be ordered".into()));
        }
        if self.steps_per_epoch == 0 || self.encoder_hidden == 0 || self.decoder_hidden.0 == 0 || self.decoder_hidden.1 == 0 {
            return Err(Error::Argument("epoch length and layer widths must be >= 1".into()));
        }
        if self.csi == CsiMode::Unknown {
            return Err(Error::Argument("the transceiver needs a channel estimate; unknown CSI is not supported".into()));
        }
        Ok(())
    }
}

/// `(1−α)·ce_s + α·ce_fj`.
pub fn security_loss(ce_s: f64, ce_fj: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok((1.0 - alpha) * ce_s + alpha * ce_fj)
}

/// Mean cross-entropy between the uniform distribution and `probs`; zero
/// information about the message at the receiver minimizes it.
pub fn fj_suppression_ce(probs: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let m = probs.ncols() as f64;
    let uniform = Array2::from_elem(probs.raw_dim(), 1.0 / m);
    Ok((soft_cross_entropy(probs, &uniform)?, soft_cross_entropy_grad(probs, &uniform)?))
}

/// Row-wise argmax, ties to the lowest index.
pub fn argmax_rows(probs: &Array2<f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (j, v) in r.iter().enumerate() {
                if *v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    Rx,
    Eve,
}

impl Receiver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Receiver::Rx => "rx",
            Receiver::Eve => "eve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlerCurve {
    pub receiver: Receiver,
    pub snr_db: Vec<f64>,
    pub bler: Vec<f64>,
    pub trials: Vec<u64>,
    pub errors: Vec<u64>,
}

impl BlerCurve {
    /// SNR at which the curve first falls to `level`, interpolating
    /// linearly in `log10(bler)` between grid points.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        for i in 1..self.snr_db.len() {
            let (b0, b1) = (self.bler[i - 1], self.bler[i]);
            if b0 > level && b1 <= level {
                if b1 <= 0.0 {
                    return Some(self.snr_db[i]);
                }
                let (l0, l1, lt) = (b0.log10(), b1.log10(), level.log10());
                let f = (l0 - lt) / (l0 - l1);
                return Some(self.snr_db[i - 1] + f * (self.snr_db[i] - self.snr_db[i - 1]));
            }
        }
        if self.bler.first().is_some_and(|b| *b <= level) {
            return self.snr_db.first().copied();
        }
        None
    }
}

/// Transmit batch produced by [`AefjModel::encode`].
#[derive(Debug, Clone)]
pub struct EncodedBatch {
    pub designs: Vec<LcdDesign>,
    /// Encoder output `c`, `batch × 2N_s` real.
    pub symbols: Array2<f64>,
    /// Information part `s` before the power normalization.
    pub s: Vec<Vec<Complex64>>,
    /// Jamming part `w` before the power normalization.
    pub w: Vec<Vec<Complex64>>,
    /// Transmitted `x = κ (s + w)`.
    pub x: Vec<Vec<Complex64>>,
    /// Per-block information amplitude `sqrt(φP/‖T‖²)`.
    pub amp: Vec<f64>,
    pub kappa: f64,
    pub p_total: f64,
}

/// Mean losses of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLosses {
    pub total: f64,
    pub ce_info: f64,
    pub ce_fj: f64,
    pub generator: f64,
    pub eve: f64,
}

/// Per-epoch record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub generator_loss: f64,
    pub eve_loss: f64,
}

#[derive(Debug, Clone)]
pub struct AefjModel {
    pub cfg: AefjConfig,
    ant: Antennas,
    pub encoder: Network,
    pub generator: LcdGenerator,
    pub decoder: Network,
    pub eve_decoder: Network,
}

fn decoder_specs(input: usize, hidden: (usize, usize), m: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { input, output: hidden.0 },
        LayerSpec::Relu,
        LayerSpec::BatchNorm { dim: hidden.0 },
        LayerSpec::Dense { input: hidden.0, output: hidden.1 },
        LayerSpec::Relu,
        LayerSpec::Dense { input: hidden.1, output: m },
        LayerSpec::Softmax,
    ]
}

fn encoder_specs(m: usize, hidden: usize, streams: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { input: m, output: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { input: hidden, output: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { input: hidden, output: 2 * streams },
        // Unit average power per complex stream.
        LayerSpec::PowerNorm { target_power: streams as f64 },
    ]
}

fn row_to_complex(row: ndarray::ArrayView1<f64>) -> Vec<Complex64> {
    let n = row.len() / 2;
    (0..n).map(|i| Complex64::new(row[i], row[i + n])).collect()
}

fn complex_rows(v: &[Vec<Complex64>]) -> Array2<f64> {
    let n = v.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((v.len(), 2 * n));
    for (r, row) in v.iter().enumerate() {
        for (i, z) in row.iter().enumerate() {
            out[(r, i)] = z.re;
            out[(r, i + n)] = z.im;
        }
    }
    out
}

fn matvec(a: &ComplexMatrix, x: &[Complex64]) -> Vec<Complex64> {
    a.mul_vec(x).expect("dimensions fixed by construction")
}

fn add_noise<R: Rng + ?Sized>(v: &mut [Complex64], var: f64, rng: &mut R) {
    let noise = complex_normal_vec(rng, v.len(), var);
    for (y, n) in v.iter_mut().zip(noise) {
        *y += n;
    }
}

/// Equalized reception: `ĉ = (X†T_eff)⁺ (X† x + n)` with `T_eff = κ·amp·T`.
struct Reception {
    c_hat: Vec<Vec<Complex64>>,
    eq: Vec<ComplexMatrix>,
}

impl AefjModel {
    pub fn new(ant: Antennas, cfg: AefjConfig) -> Result<Self> {
        cfg.validate()?;
        let generator = LcdGenerator::new(ant, &cfg.generator, &mut stream_rng(cfg.seed, streams::INIT))?;
        let ns = generator.streams();
        let encoder = Network::new(
            &encoder_specs(cfg.messages, cfg.encoder_hidden, ns),
            &mut stream_rng(cfg.seed, streams::INIT + 1),
        )?;
        let dec = decoder_specs(2 * ns, cfg.decoder_hidden, cfg.messages);
        let decoder = Network::new(&dec, &mut stream_rng(cfg.seed, streams::INIT + 2))?;
        let eve_decoder = Network::new(&dec, &mut stream_rng(cfg.seed, streams::INIT + 3))?;
        Ok(Self {
            cfg,
            ant,
            encoder,
            generator,
            decoder,
            eve_decoder,
        })
    }

    pub fn antennas(&self) -> Antennas {
        self.ant
    }

    pub fn streams(&self) -> usize {
        self.generator.streams()
    }

    fn sample_messages<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.cfg.messages)).collect()
    }

    /// Builds the transmit batch from encoder output `symbols` and generator
    /// decisions.
    fn assemble<R: Rng + ?Sized>(&self, symbols: Array2<f64>, designs: Vec<LcdDesign>, p_total: f64, rng: &mut R) -> Result<EncodedBatch> {
        let nt = self.ant.nt;
        let mut s = Vec::with_capacity(designs.len());
        let mut w = Vec::with_capacity(designs.len());
        let mut amp = Vec::with_capacity(designs.len());
        for (r, d) in designs.iter().enumerate() {
            let phi = if self.cfg.fj { d.phi } else { 1.0 };
            let fro2 = d.t.frobenius_norm().powi(2);
            let a = (phi * p_total / fro2).sqrt();
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Numerical(format!("information amplitude {a} for block {r}")));
            }
            let c = row_to_complex(symbols.row(r));
            s.push(matvec(&d.t, &c).into_iter().map(|z| z * a).collect::<Vec<_>>());
            let n_fj = d.z.cols();
            w.push(if n_fj == 0 || phi >= 1.0 {
                vec![Complex64::ZERO; nt]
            } else {
                let v = complex_normal_vec(rng, n_fj, (1.0 - phi) * p_total / n_fj as f64);
                matvec(&d.z, &v)
            });
            amp.push(a);
        }
        let sum_sq: f64 = s.iter().zip(&w).flat_map(|(a, b)| a.iter().zip(b)).map(|(a, b)| (a + b).norm_sqr()).sum();
        let kappa = (p_total * designs.len() as f64 / sum_sq).sqrt();
        let x = s
            .iter()
            .zip(&w)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| (a + b) * kappa).collect())
            .collect();
        Ok(EncodedBatch {
            designs,
            symbols,
            s,
            w,
            x,
            amp,
            kappa,
            p_total,
        })
    }

    /// Inference-mode transmit batch for `messages` over `reals` at `snr_db`.
    pub fn encode<R: Rng + ?Sized>(&self, messages: &[usize], reals: &[Realization], snr_db: f64, rng: &mut R) -> Result<EncodedBatch> {
        if messages.len() != reals.len() || messages.len() < 2 {
            return Err(Error::Argument("need one realization per message and at least 2 messages".into()));
        }
        let inputs: Vec<(&ComplexMatrix, f64)> = reals.iter().map(|r| r.csi.estimate().map(|h| (h, snr_db))).collect::<Result<_>>()?;
        let designs = self.generator.design_batch(&inputs)?;
        let symbols = self.encoder.predict(&one_hot(messages, self.cfg.messages))?;
        self.assemble(symbols, designs, 10f64.powf(snr_db / 10.0), rng)
    }

    fn receive<R: Rng + ?Sized>(
        &self,
        batch: &EncodedBatch,
        signal: &[Vec<Complex64>],
        channels: &[&ComplexMatrix],
        known: &[&ComplexMatrix],
        noise: f64,
        rng: &mut R,
        exact_left_inverse: bool,
    ) -> Result<Reception> {
        let mut c_hat = Vec::with_capacity(signal.len());
        let mut eq = Vec::with_capacity(signal.len());
        for (r, x) in signal.iter().enumerate() {
            let d = &batch.designs[r];
            let eff = (&known[r].adjoint() * &d.t).scale(batch.kappa * batch.amp[r]);
            let e = if exact_left_inverse { left_pinv(&eff)? } else { pinv(&eff, DEFAULT_RANK_TOL)? };
            let mut y = matvec(&channels[r].adjoint(), x);
            add_noise(&mut y, noise, rng);
            c_hat.push(matvec(&e, &y));
            eq.push(e);
        }
        Ok(Reception { c_hat, eq })
    }

    /// Receiver-side equalized symbols for `batch`.
    fn receive_rx<R: Rng + ?Sized>(&self, batch: &EncodedBatch, signal: &[Vec<Complex64>], reals: &[Realization], rng: &mut R) -> Result<Reception> {
        let channels: Vec<&ComplexMatrix> = reals.iter().map(|r| &r.draw.h).collect();
        let known: Vec<&ComplexMatrix> = reals.iter().map(|r| r.csi.estimate()).collect::<Result<_>>()?;
        let noise = reals[0].draw.sigma_b2;
        self.receive(batch, signal, &channels, &known, noise, rng, true)
    }

    /// Eavesdropper-side equalized symbols; it knows its own channel and the
    /// precoder but not the jamming realization.
    fn receive_eve<R: Rng + ?Sized>(&self, batch: &EncodedBatch, reals: &[Realization], rng: &mut R) -> Result<Reception> {
        let channels: Vec<&ComplexMatrix> = reals.iter().map(|r| &r.draw.g).collect();
        let noise = reals[0].draw.sigma_e2;
        self.receive(batch, &batch.x, &channels, &channels, noise, rng, false)
    }

    /// Decoded messages for receiver-side symbols.
    pub fn decode(&self, c_hat: &Array2<f64>, receiver: Receiver) -> Result<Vec<usize>> {
        let net = match receiver {
            Receiver::Rx => &self.decoder,
            Receiver::Eve => &self.eve_decoder,
        };
        Ok(argmax_rows(&net.predict(c_hat)?))
    }

    /// One joint update of generator, encoder, decoder and eavesdropper.
    pub fn train_step(&mut self, step: u64) -> Result<StepLosses> {
        let cfg = self.cfg;
        let mut rng = stream_rng(cfg.seed, streams::TRAINING + step);
        let snr = rng.random_range(cfg.snr_db.0..=cfg.snr_db.1);
        let p_total = 10f64.powf(snr / 10.0);
        let messages = self.sample_messages(cfg.batch, &mut rng);
        let reals = sample_realizations(self.ant, cfg.csi, cfg.batch, &mut rng)?;
        let adam = AdamConfig::with_lr(cfg.lr);

        let gen_in: Vec<_> = reals.iter().map(|r| (&r.draw, r.csi.h_hat.as_ref().expect("estimate present"), snr)).collect();
        let (designs, gen_grad, gen_loss) = self.generator.forward_train(&gen_in)?;
        self.generator.apply(&gen_grad, &adam)?;

        let symbols = self.encoder.forward(&one_hot(&messages, cfg.messages), true)?;
        let batch = self.assemble(symbols, designs, p_total, &mut rng)?;

        // Receiver: information batch and the FJ-only batch.
        let rx = self.receive_rx(&batch, &batch.x, &reals, &mut rng)?;
        let fj_only: Vec<Vec<Complex64>> = batch.w.iter().map(|w| w.iter().map(|z| z * batch.kappa).collect()).collect();
        let rx_fj = self.receive_rx(&batch, &fj_only, &reals, &mut rng)?;

        let probs = self.decoder.forward(&complex_rows(&rx.c_hat), true)?;
        let ce_info = cross_entropy(&probs, &messages)?.loss;
        let g_info = cross_entropy_grad(&probs, &messages)? * (1.0 - cfg.alpha);
        let (mut dec_grads, g_chat) = self.decoder.backward(&g_info)?;
        let (ce_fj, g_fj) = if cfg.alpha > 0.0 {
            let probs_fj = self.decoder.forward_frozen_stats(&complex_rows(&rx_fj.c_hat))?;
            let (ce, g) = fj_suppression_ce(&probs_fj)?;
            let (grads_fj, _) = self.decoder.backward(&(g * cfg.alpha))?;
            (ce, Some(grads_fj))
        } else {
            (0.0, None)
        };
        if let Some(g) = g_fj {
            dec_grads.add_assign(&g);
        }
        self.decoder.adam_step(&dec_grads, &adam)?;

        // Encoder gradient: back through equalizer, channel, power scaling and precoder.
        let mut g_x: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.batch);
        for (r, e) in rx.eq.iter().enumerate() {
            let g_c = row_to_complex(g_chat.row(r));
            g_x.push(matvec(&reals[r].draw.h, &matvec(&e.adjoint(), &g_c)));
        }
        let pre: Vec<Vec<Complex64>> = batch
            .s
            .iter()
            .zip(&batch.w)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| a + b).collect())
            .collect();
        let sum_sq: f64 = pre.iter().flatten().map(|z| z.norm_sqr()).sum();
        let inner: f64 = g_x.iter().flatten().zip(pre.iter().flatten()).map(|(g, u)| (g.conj() * u).re).sum();
        let mut g_sym = Vec::with_capacity(cfg.batch);
        for r in 0..cfg.batch {
            let g_u: Vec<Complex64> = g_x[r]
                .iter()
                .zip(&pre[r])
                .map(|(g, u)| g * batch.kappa - u * (batch.kappa * inner / sum_sq))
                .collect();
            let g_c = matvec(&batch.designs[r].t.adjoint(), &g_u);
            g_sym.push(g_c.into_iter().map(|z| z * batch.amp[r]).collect::<Vec<_>>());
        }
        let (enc_grads, _) = self.encoder.backward(&complex_rows(&g_sym))?;
        self.encoder.adam_step(&enc_grads, &adam)?;

        let eve = self.eve_update(&batch, &messages, &reals, &adam, &mut rng)?;
        let total = security_loss(ce_info, ce_fj, cfg.alpha)?;
        if !total.is_finite() {
            return Err(Error::Divergence("transceiver loss became non-finite".into()));
        }
        Ok(StepLosses {
            total,
            ce_info,
            ce_fj,
            generator: gen_loss,
            eve,
        })
    }

    fn eve_update<R: Rng + ?Sized>(
        &mut self,
        batch: &EncodedBatch,
        messages: &[usize],
        reals: &[Realization],
        adam: &AdamConfig,
        rng: &mut R,
    ) -> Result<f64> {
        let eve = self.receive_eve(batch, reals, rng)?;
        let probs = self.eve_decoder.forward(&complex_rows(&eve.c_hat), true)?;
        let ce = cross_entropy(&probs, messages)?.loss;
        let (g, _) = self.eve_decoder.backward(&cross_entropy_grad(&probs, messages)?)?;
        self.eve_decoder.adam_step(&g, adam)?;
        Ok(ce)
    }

    /// Further eavesdropper training against the frozen transmitter.
    pub fn train_eavesdropper(&mut self, steps: usize, first_step: u64) -> Result<Vec<f64>> {
        let cfg = self.cfg;
        let adam = AdamConfig::with_lr(cfg.lr);
        (0..steps as u64)
            .map(|k| {
                let mut rng = stream_rng(cfg.seed, streams::TRAINING + first_step + k);
                let snr = rng.random_range(cfg.snr_db.0..=cfg.snr_db.1);
                let messages = self.sample_messages(cfg.batch, &mut rng);
                let reals = sample_realizations(self.ant, cfg.csi, cfg.batch, &mut rng)?;
                let batch = self.encode(&messages, &reals, snr, &mut rng)?;
                self.eve_update(&batch, &messages, &reals, &adam, &mut rng)
            })
            .collect()
    }

    /// Mean information cross-entropy at the receiver on a fixed validation
    /// set (inference mode).
    pub fn validation_loss(&self, n: usize) -> Result<f64> {
        let mut rng = stream_rng(self.cfg.seed, streams::EVALUATION);
        let snr = 0.5 * (self.cfg.snr_db.0 + self.cfg.snr_db.1);
        let messages = self.sample_messages(n, &mut rng);
        let reals = sample_realizations(self.ant, self.cfg.csi, n, &mut rng)?;
        let batch = self.encode(&messages, &reals, snr, &mut rng)?;
        let rx = self.receive_rx(&batch, &batch.x, &reals, &mut rng)?;
        Ok(cross_entropy(&self.decoder.predict(&complex_rows(&rx.c_hat))?, &messages)?.loss)
    }

    /// Runs the configured schedule; one record per epoch.
    pub fn train(&mut self) -> Result<Vec<EpochRecord>> {
        let cfg = self.cfg;
        let mut history = Vec::new();
        let mut acc = (0.0, 0.0, 0.0, 0usize);
        for step in 0..cfg.steps {
            let l = self.train_step(step as u64).map_err(|e| {
                Error::Divergence(format!("training aborted at step {step} (seed {}): {e}", cfg.seed))
            })?;
            acc = (acc.0 + l.total, acc.1 + l.generator, acc.2 + l.eve, acc.3 + 1);
            if acc.3 == cfg.steps_per_epoch || step + 1 == cfg.steps {
                let n = acc.3 as f64;
                history.push(EpochRecord {
                    epoch: history.len(),
                    train_loss: acc.0 / n,
                    validation_loss: self.validation_loss(512)?,
                    generator_loss: acc.1 / n,
                    eve_loss: acc.2 / n,
                });
                acc = (0.0, 0.0, 0.0, 0);
            }
        }
        if cfg.eve_extra_steps > 0 {
            self.train_eavesdropper(cfg.eve_extra_steps, cfg.steps as u64)?;
        }
        Ok(history)
    }

    /// Block error rates over `snr_grid`, `trials` blocks per point,
    /// evaluated in parallel chunks with fixed per-chunk streams.
    pub fn eval_bler(&self, snr_grid: &[f64], trials: u64, receiver: Receiver, seed: u64) -> Result<BlerCurve> {
        const CHUNK: u64 = 500;
        if trials == 0 {
            return Err(Error::Argument("need at least one trial per point".into()));
        }
        let jobs: Vec<(usize, u64, u64)> = (0..snr_grid.len())
            .flat_map(|p| {
                (0..trials.div_ceil(CHUNK)).map(move |c| (p, c, CHUNK.min(trials - c * CHUNK)))
            })
            .collect();
        let errors: Vec<(usize, u64)> = jobs
            .par_iter()
            .map(|&(p, c, n)| {
                let n = n.max(2);
                let mut rng = stream_rng(seed, streams::EVALUATION + ((p as u64) << 24) + c);
                let messages = self.sample_messages(n as usize, &mut rng);
                let reals = sample_realizations(self.ant, self.cfg.csi, n as usize, &mut rng)?;
                let batch = self.encode(&messages, &reals, snr_grid[p], &mut rng)?;
                let rec = match receiver {
                    Receiver::Rx => self.receive_rx(&batch, &batch.x, &reals, &mut rng)?,
                    Receiver::Eve => self.receive_eve(&batch, &reals, &mut rng)?,
                };
                let decided = self.decode(&complex_rows(&rec.c_hat), receiver)?;
                Ok((p, decided.iter().zip(&messages).filter(|(a, b)| a != b).count() as u64))
            })
            .collect::<Result<_>>()?;
        let mut err = vec![0u64; snr_grid.len()];
        for (p, e) in errors {
            err[p] += e;
        }
        let counts: Vec<u64> = (0..snr_grid.len())
            .map(|_| (0..trials.div_ceil(CHUNK)).map(|c| CHUNK.min(trials - c * CHUNK).max(2)).sum())
            .collect();
        Ok(BlerCurve {
            receiver,
            snr_db: snr_grid.to_vec(),
            bler: err.iter().zip(&counts).map(|(e, t)| *e as f64 / *t as f64).collect(),
            trials: counts,
            errors: err,
        })
    }

    /// `‖H†w‖/‖w‖` averaged over `n` held-out blocks.
    pub fn fj_leakage(&self, n: usize, snr_db: f64, seed: u64) -> Result<f64> {
        let mut rng = stream_rng(seed, streams::EVALUATION);
        let messages = self.sample_messages(n, &mut rng);
        let reals = sample_realizations(self.ant, self.cfg.csi, n, &mut rng)?;
        let batch = self.encode(&messages, &reals, snr_db, &mut rng)?;
        let mut total = 0.0;
        let mut count = 0;
        for (w, r) in batch.w.iter().zip(&reals) {
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                let leak = matvec(&r.draw.h.adjoint(), w).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                total += leak / norm;
                count += 1;
            }
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    /// Writes the four networks as checkpoints into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let seed = self.cfg.seed;
        save_checkpoint(&self.encoder, &dir.join("encoder.fjnn"), seed)?;
        save_checkpoint(self.generator.network(), &dir.join("generator.fjnn"), seed)?;
        save_checkpoint(&self.decoder, &dir.join("decoder.fjnn"), seed)?;
        save_checkpoint(&self.eve_decoder, &dir.join("eve_decoder.fjnn"), seed)?;
        Ok(())
    }
}
