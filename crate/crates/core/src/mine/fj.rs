//! Alternating training of a message encoder and two MI estimators with
//! nullspace jamming.

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{MiEstimate, MineEstimator};
use crate::channel::{complex_normal_vec, stream_rng, streams, Antennas, ChannelDraw, CsiMode, CsiState};
use crate::conventional::{self, design_fj, FjDesign};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::neuralnet::{one_hot, AdamConfig, LayerSpec, Network};

/// When outer training stops. Every rule watches held-out `I_AB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopRule {
    /// Stop on the first iteration that does not improve on the previous one.
    Raw,
    /// Stop after `patience` iterations without a new best.
    Patience { patience: usize },
    /// Stop once `|I(i) − I(i − window)| < rel_tol·|I(i)|`.
    Plateau { window: usize, rel_tol: f64 },
    /// Run the full iteration budget.
    None,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Plateau { window: 20, rel_tol: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineFjConfig {
    pub antennas: Antennas,
    pub snr_db: f64,
    pub beta: f64,
    /// Fraction of the power budget given to the information signal.
    pub phi: f64,
    pub messages: usize,
    /// Fresh samples drawn per outer iteration.
    pub batch: usize,
    /// Rows per estimator or encoder step; the batch is split into chunks.
    pub minibatch: usize,
    /// Fixed held-out set used for the history and stopping.
    pub eval_batch: usize,
    pub iterations: usize,
    pub inner_steps: usize,
    pub estimator_hidden: usize,
    pub encoder_hidden: usize,
    pub lr_estimator: f64,
    pub lr_encoder: f64,
    pub stop: StopRule,
    pub csi: CsiMode,
    /// Which draw of the seeded channel ensemble to train on.
    pub channel_index: u64,
    pub seed: u64,
}

impl Default for MineFjConfig {
    fn default() -> Self {
        Self {
            antennas: Antennas { nt: 10, nr: 4, ne: 4 },
            snr_db: 20.0,
            beta: 0.5,
            phi: 0.5,
            messages: 16,
            batch: 1000,
            minibatch: 1000,
            eval_batch: 2000,
            iterations: 300,
            inner_steps: 5,
            estimator_hidden: 64,
            encoder_hidden: 64,
            lr_estimator: 1e-3,
            lr_encoder: 1e-3,
            stop: StopRule::default(),
            csi: CsiMode::Perfect,
            channel_index: 0,
            seed: 0,
        }
    }
}

impl MineFjConfig {
    pub fn validate(&self) -> Result<()> {
        Antennas::new(self.antennas.nt, self.antennas.nr, self.antennas.ne)?;
        let bad = |m: String| Err(Error::Argument(m));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return bad(format!("phi must lie in (0, 1], got {}", self.phi));
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if self.messages < 2 {
            return bad("need at least 2 messages".into());
        }
        if self.minibatch < 2 || self.batch < self.minibatch || self.eval_batch < 2 {
            return bad(format!(
                "need 2 <= minibatch <= batch and eval_batch >= 2, got {}/{}/{}",
                self.minibatch, self.batch, self.eval_batch
            ));
        }
        if self.inner_steps == 0 || self.estimator_hidden == 0 || self.encoder_hidden == 0 {
            return bad("inner_steps and hidden widths must be >= 1".into());
        }
        if !(self.lr_estimator > 0.0 && self.lr_encoder > 0.0) {
            return bad("learning rates must be positive".into());
        }
        match self.stop {
            StopRule::Patience { patience: 0 } => bad("patience must be >= 1".into()),
            StopRule::Plateau { window, rel_tol } if window == 0 || !(rel_tol > 0.0) => {
                bad("plateau needs window >= 1 and rel_tol > 0".into())
            }
            _ => Ok(()),
        }
    }
}

/// One outer iteration on the held-out set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MineFjHistory {
    pub iteration: usize,
    pub i_ab: f64,
    pub i_ae: f64,
    pub gsc: f64,
    /// Negated security objective.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct MineFjOutcome {
    /// Encoder and estimators at the best held-out `I_AB`.
    pub encoder: Network,
    pub estimator_ab: MineEstimator,
    pub estimator_ae: MineEstimator,
    pub history: Vec<MineFjHistory>,
    pub best_iteration: usize,
    /// Iteration at which the configured rule stopped training, if it did.
    pub stopped_at: Option<usize>,
    /// First iteration at which the raw non-improvement rule would have fired.
    pub raw_stop: Option<usize>,
    pub draw: ChannelDraw,
    pub design: FjDesign,
    pub p_info: f64,
}

impl MineFjOutcome {
    /// Mean of `I_AB − I_AE` over the last `window` recorded iterations.
    pub fn secrecy_proxy(&self, window: usize) -> f64 {
        let n = self.history.len();
        let tail = &self.history[n.saturating_sub(window.max(1))..];
        tail.iter().map(|h| h.i_ab - h.i_ae).sum::<f64>() / tail.len() as f64
    }

    /// Mean of the recorded guaranteed secrecy over the last `window` iterations.
    pub fn gsc_proxy(&self, window: usize) -> f64 {
        let n = self.history.len();
        let tail = &self.history[n.saturating_sub(window.max(1))..];
        tail.iter().map(|h| h.gsc).sum::<f64>() / tail.len() as f64
    }
}

/// Objective maximized by the encoder: `β·I_AB − (1−β)·I_AE`.
pub fn mine_security_loss(i_ab: &MiEstimate, i_ae: &MiEstimate, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Argument(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok(beta * i_ab.value - (1.0 - beta) * i_ae.value)
}

/// Guaranteed secrecy for an estimated `I_AB`; negative estimates count as 0.
pub fn gsc_track(i_ab: f64, draw: &ChannelDraw, design: &FjDesign, q_s: &ComplexMatrix) -> Result<f64> {
    Ok(conventional::gsc(i_ab.max(0.0), &draw.g, design, q_s)?.value)
}

fn encoder_specs(m: usize, hidden: usize, nt: usize, p_info: f64) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { input: m, output: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { input: hidden, output: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { input: hidden, output: 2 * nt },
        LayerSpec::PowerNorm { target_power: p_info },
    ]
}

/// Noise realizations for a batch, fixed before the signal is known.
struct Noise {
    /// `Z v` per row, `N_t` entries.
    jam: Vec<Vec<Complex64>>,
    n_b: Vec<Vec<Complex64>>,
    n_e: Vec<Vec<Complex64>>,
}

impl Noise {
    fn sample<R: rand::Rng + ?Sized>(n: usize, draw: &ChannelDraw, design: &FjDesign, rng: &mut R) -> Self {
        let ant = draw.antennas();
        let mut jam = Vec::with_capacity(n);
        let mut n_b = Vec::with_capacity(n);
        let mut n_e = Vec::with_capacity(n);
        for _ in 0..n {
            jam.push(conventional::sample_fj(design, rng));
            n_b.push(complex_normal_vec(rng, ant.nr, draw.sigma_b2));
            n_e.push(complex_normal_vec(rng, ant.ne, draw.sigma_e2));
        }
        Self { jam, n_b, n_e }
    }
}

fn to_complex(row: ndarray::ArrayView1<f64>) -> Vec<Complex64> {
    let n = row.len() / 2;
    (0..n).map(|i| Complex64::new(row[i], row[i + n])).collect()
}

fn write_row(out: &mut Array2<f64>, r: usize, v: &[Complex64]) {
    let n = v.len();
    for (i, z) in v.iter().enumerate() {
        out[(r, i)] = z.re;
        out[(r, i + n)] = z.im;
    }
}

/// `X†(s + w) + n` for each row of the realified signal block.
fn receive(x: &ComplexMatrix, s: &Array2<f64>, jam: &[Vec<Complex64>], noise: &[Vec<Complex64>]) -> Array2<f64> {
    let xa = x.adjoint();
    let mut out = Array2::zeros((s.nrows(), 2 * x.cols()));
    for r in 0..s.nrows() {
        let tx: Vec<Complex64> = to_complex(s.row(r)).iter().zip(&jam[r]).map(|(a, b)| a + b).collect();
        let mut y = xa.mul_vec(&tx).expect("dimensions fixed by construction");
        for (yi, ni) in y.iter_mut().zip(&noise[r]) {
            *yi += ni;
        }
        write_row(&mut out, r, &y);
    }
    out
}

/// Adds `X·g_y` (the pullback through `y = X†s + …`) to `g_s`, scaled by `k`.
fn pull_back(g_s: &mut Array2<f64>, x: &ComplexMatrix, g_x: &Array2<f64>, g_y: &Array2<f64>, k: f64) {
    for r in 0..g_s.nrows() {
        let back = x.mul_vec(&to_complex(g_y.row(r))).expect("dimensions fixed by construction");
        let n = back.len();
        for i in 0..n {
            g_s[(r, i)] += k * (g_x[(r, i)] + back[i].re);
            g_s[(r, i + n)] += k * (g_x[(r, i + n)] + back[i].im);
        }
    }
}

/// `E[s s†]` over the rows of a realified signal block.
fn sample_covariance(s: &Array2<f64>) -> ComplexMatrix {
    let n = s.ncols() / 2;
    let mut acc = ComplexMatrix::zeros(n, n);
    for r in 0..s.nrows() {
        let v = ComplexMatrix::column_vector(&to_complex(s.row(r)));
        acc = &acc + &(&v * &v.adjoint());
    }
    acc.scale(1.0 / s.nrows() as f64)
}

struct Trainer {
    cfg: MineFjConfig,
    draw: ChannelDraw,
    design: FjDesign,
    p_info: f64,
    encoder: Network,
    est_ab: MineEstimator,
    est_ae: MineEstimator,
}

struct Evaluation {
    one_hot: Array2<f64>,
    noise: Noise,
}

impl Trainer {
    fn new(cfg: &MineFjConfig) -> Result<Self> {
        cfg.validate()?;
        let ant = cfg.antennas;
        let p_total = 10f64.powf(cfg.snr_db / 10.0);
        let draw = ChannelDraw::indexed(ant, 1.0, 1.0, cfg.seed, cfg.channel_index);
        let csi = CsiState::observe(&draw, cfg.csi, &mut stream_rng(cfg.seed, streams::CHANNEL + (1 << 32) + cfg.channel_index))?;
        let probe = design_fj(csi.estimate()?, 0.0)?;
        let (p_info, sigma_v2) = if probe.n_fj == 0 {
            (p_total, 0.0)
        } else {
            (cfg.phi * p_total, (1.0 - cfg.phi) * p_total / probe.n_fj as f64)
        };
        let design = probe.with_variance(sigma_v2);
        let encoder = Network::new(
            &encoder_specs(cfg.messages, cfg.encoder_hidden, ant.nt, p_info),
            &mut stream_rng(cfg.seed, streams::INIT),
        )?;
        let x_dim = 2 * ant.nt;
        let est_ab = MineEstimator::new(x_dim, 2 * ant.nr, cfg.estimator_hidden, &mut stream_rng(cfg.seed, streams::INIT + 1))?;
        let est_ae = MineEstimator::new(x_dim, 2 * ant.ne, cfg.estimator_hidden, &mut stream_rng(cfg.seed, streams::INIT + 2))?;
        Ok(Self {
            cfg: cfg.clone(),
            draw,
            design,
            p_info,
            encoder,
            est_ab,
            est_ae,
        })
    }

    fn messages<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.cfg.messages)).collect();
        one_hot(&labels, self.cfg.messages)
    }

    fn outer_step<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let cfg = &self.cfg;
        let mb = cfg.minibatch;
        let chunks = cfg.batch / mb;
        let oh = self.messages(chunks * mb, rng);
        let noise = Noise::sample(chunks * mb, &self.draw, &self.design, rng);
        let s_all = self.encoder.predict(&oh)?;
        let y_all = receive(&self.draw.h, &s_all, &noise.jam, &noise.n_b);
        let z_all = receive(&self.draw.g, &s_all, &noise.jam, &noise.n_e);
        let adam_est = AdamConfig::with_lr(cfg.lr_estimator);
        for k in 0..cfg.inner_steps {
            let c = k % chunks;
            let rows = s![c * mb..(c + 1) * mb, ..];
            let s_mb = s_all.slice(rows).to_owned();
            self.est_ab.train_step(&s_mb, &y_all.slice(rows).to_owned(), &adam_est)?;
            self.est_ae.train_step(&s_mb, &z_all.slice(rows).to_owned(), &adam_est)?;
        }

        // Encoder step with the estimators held fixed.
        let c = cfg.inner_steps % chunks;
        let range = c * mb..(c + 1) * mb;
        let s_mb = self.encoder.forward(&oh.slice(s![range.clone(), ..]).to_owned(), true)?;
        let y = receive(&self.draw.h, &s_mb, &noise.jam[range.clone()], &noise.n_b[range.clone()]);
        let z = receive(&self.draw.g, &s_mb, &noise.jam[range.clone()], &noise.n_e[range]);
        let g_ab = self.est_ab.input_gradient(&s_mb, &y)?;
        let g_ae = self.est_ae.input_gradient(&s_mb, &z)?;
        let mut g_s = Array2::zeros(s_mb.raw_dim());
        // Descent on the negated objective.
        pull_back(&mut g_s, &self.draw.h, &g_ab.grad_x, &g_ab.grad_y, -cfg.beta);
        pull_back(&mut g_s, &self.draw.g, &g_ae.grad_x, &g_ae.grad_y, 1.0 - cfg.beta);
        let (grads, _) = self.encoder.backward(&g_s)?;
        self.encoder.adam_step(&grads, &AdamConfig::with_lr(cfg.lr_encoder))
    }

    fn evaluate(&self, eval: &Evaluation, iteration: usize) -> Result<MineFjHistory> {
        let s = self.encoder.predict(&eval.one_hot)?;
        let y = receive(&self.draw.h, &s, &eval.noise.jam, &eval.noise.n_b);
        let z = receive(&self.draw.g, &s, &eval.noise.jam, &eval.noise.n_e);
        let i_ab = self.est_ab.dv_estimate(&s, &y)?;
        let i_ae = self.est_ae.dv_estimate(&s, &z)?;
        let objective = mine_security_loss(&i_ab, &i_ae, self.cfg.beta)?;
        let gsc = gsc_track(i_ab.value, &self.draw, &self.design, &sample_covariance(&s))?;
        Ok(MineFjHistory {
            iteration,
            i_ab: i_ab.value,
            i_ae: i_ae.value,
            gsc,
            loss: -objective,
        })
    }
}

/// Trains on one channel instance. Returns the best checkpoint by held-out
/// `I_AB` with the full trajectory.
pub fn train_mine_fj(cfg: &MineFjConfig) -> Result<MineFjOutcome> {
    let mut tr = Trainer::new(cfg)?;
    let mut eval_rng = stream_rng(cfg.seed, streams::EVALUATION);
    let eval = Evaluation {
        one_hot: tr.messages(cfg.eval_batch, &mut eval_rng),
        noise: Noise::sample(cfg.eval_batch, &tr.draw, &tr.design, &mut eval_rng),
    };
    let mut rng = stream_rng(cfg.seed, streams::TRAINING);
    let mut history: Vec<MineFjHistory> = Vec::with_capacity(cfg.iterations);
    let mut best: Option<(usize, f64, Network, MineEstimator, MineEstimator)> = None;
    let mut raw_stop = None;
    let mut stopped_at = None;
    for it in 1..=cfg.iterations {
        tr.outer_step(&mut rng).map_err(|e| match e {
            Error::Divergence(m) => Error::Divergence(format!("outer iteration {it}: {m}")),
            other => other,
        })?;
        let h = tr.evaluate(&eval, it)?;
        let prev = history.last().map(|p| p.i_ab);
        history.push(h);
        if raw_stop.is_none() && prev.is_some_and(|p| h.i_ab <= p) {
            raw_stop = Some(it);
        }
        if best.as_ref().is_none_or(|b| h.i_ab > b.1) {
            best = Some((it, h.i_ab, tr.encoder.clone(), tr.est_ab.clone(), tr.est_ae.clone()));
        }
        let best_it = best.as_ref().map_or(it, |b| b.0);
        let stop = match cfg.stop {
            StopRule::Raw => raw_stop == Some(it),
            StopRule::Patience { patience } => it - best_it >= patience,
            StopRule::Plateau { window, rel_tol } => {
                it > window && (h.i_ab - history[it - 1 - window].i_ab).abs() < rel_tol * h.i_ab.abs()
            }
            StopRule::None => false,
        };
        if stop {
            stopped_at = Some(it);
            break;
        }
    }
    let (best_iteration, encoder, estimator_ab, estimator_ae) = match best {
        Some((it, _, e, a, b)) => (it, e, a, b),
        None => (0, tr.encoder, tr.est_ab, tr.est_ae),
    };
    Ok(MineFjOutcome {
        encoder,
        estimator_ab,
        estimator_ae,
        history,
        best_iteration,
        stopped_at,
        raw_stop,
        draw: tr.draw,
        design: tr.design,
        p_info: tr.p_info,
    })
}

/// Held-out `(I_AB, I_AE)` of a trained outcome on a fresh sample set.
pub fn evaluate_outcome(outcome: &MineFjOutcome, cfg: &MineFjConfig, n: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = stream_rng(seed, streams::EVALUATION + 1);
    let labels: Vec<usize> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..cfg.messages)).collect();
    let s = outcome.encoder.predict(&one_hot(&labels, cfg.messages))?;
    let noise = Noise::sample(n, &outcome.draw, &outcome.design, &mut rng);
    let y = receive(&outcome.draw.h, &s, &noise.jam, &noise.n_b);
    let z = receive(&outcome.draw.g, &s, &noise.jam, &noise.n_e);
    Ok((
        outcome.estimator_ab.dv_estimate(&s, &y)?.value,
        outcome.estimator_ae.dv_estimate(&s, &z)?.value,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MineFjConfig {
        MineFjConfig {
            antennas: Antennas { nt: 3, nr: 2, ne: 2 },
            snr_db: 10.0,
            batch: 128,
            minibatch: 64,
            eval_batch: 128,
            iterations: 6,
            estimator_hidden: 16,
            encoder_hidden: 16,
            stop: StopRule::None,
            ..MineFjConfig::default()
        }
    }

    #[test]
    fn loss_sign_and_limits() {
        let e = |v| MiEstimate { value: v, batch: 2, joint_term: v, marginal_term: 0.0 };
        assert_eq!(mine_security_loss(&e(2.0), &e(1.0), 1.0).unwrap(), 2.0);
        assert_eq!(mine_security_loss(&e(2.0), &e(1.0), 0.0).unwrap(), -1.0);
        assert!(mine_security_loss(&e(2.0), &e(1.0), 1.5).is_err());
    }

    #[test]
    fn jamming_is_orthogonal_to_legitimate_channel() {
        let tr = Trainer::new(&small()).unwrap();
        let noise = Noise::sample(20, &tr.draw, &tr.design, &mut stream_rng(1, 0));
        let ha = tr.draw.h.adjoint();
        for w in &noise.jam {
            let leak: f64 = ha.mul_vec(w).unwrap().iter().map(|z| z.norm_sqr()).sum();
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            assert!(leak.sqrt() <= 1e-10 * norm.sqrt().max(1.0));
        }
    }

    #[test]
    fn encoder_meets_information_power() {
        let tr = Trainer::new(&small()).unwrap();
        let oh = tr.messages(256, &mut stream_rng(2, 0));
        let s = tr.encoder.predict(&oh).unwrap();
        let p = s.mapv(|v| v * v).sum() / 256.0;
        assert!((p - tr.p_info).abs() < 1e-9 * tr.p_info);
    }

    #[test]
    fn gsc_track_delegates() {
        let tr = Trainer::new(&small()).unwrap();
        let q = ComplexMatrix::identity(3);
        let a = gsc_track(1.3, &tr.draw, &tr.design, &q).unwrap();
        let b = conventional::gsc(1.3, &tr.draw.g, &tr.design, &q).unwrap().value;
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(gsc_track(-0.2, &tr.draw, &tr.design, &q).unwrap(), 0.0);
    }

    #[test]
    fn encoder_step_leaves_estimators_alone_and_vice_versa() {
        let mut tr = Trainer::new(&small()).unwrap();
        let mut rng = stream_rng(3, 0);
        let ab = tr.est_ab.network().params().to_vec();
        let enc = tr.encoder.params().to_vec();
        tr.outer_step(&mut rng).unwrap();
        assert_ne!(tr.est_ab.network().params(), &ab[..]);
        assert_ne!(tr.encoder.params(), &enc[..]);
        // Input gradients do not touch estimator parameters.
        let before = tr.est_ab.network().params().to_vec();
        let oh = tr.messages(32, &mut rng);
        let s = tr.encoder.predict(&oh).unwrap();
        let noise = Noise::sample(32, &tr.draw, &tr.design, &mut rng);
        let y = receive(&tr.draw.h, &s, &noise.jam, &noise.n_b);
        tr.est_ab.input_gradient(&s, &y).unwrap();
        assert_eq!(tr.est_ab.network().params(), &before[..]);
    }

    #[test]
    fn deterministic_history_and_best_checkpoint() {
        let a = train_mine_fj(&small()).unwrap();
        let b = train_mine_fj(&small()).unwrap();
        assert_eq!(a.history, b.history);
        let best = a.history.iter().map(|h| h.i_ab).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.history[a.best_iteration - 1].i_ab, best);
        assert_eq!(a.encoder.params(), b.encoder.params());
    }

    #[test]
    fn raw_rule_stops_at_first_non_improvement() {
        let cfg = MineFjConfig { stop: StopRule::Raw, iterations: 30, ..small() };
        let out = train_mine_fj(&cfg).unwrap();
        assert_eq!(out.stopped_at, out.raw_stop);
        if let Some(it) = out.stopped_at {
            assert_eq!(out.history.len(), it);
            assert!(out.history[it - 1].i_ab <= out.history[it - 2].i_ab);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(MineFjConfig { beta: -0.1, ..small() }.validate().is_err());
        assert!(MineFjConfig { minibatch: 1, ..small() }.validate().is_err());
        assert!(MineFjConfig { batch: 10, minibatch: 20, ..small() }.validate().is_err());
        assert!(MineFjConfig { stop: StopRule::Patience { patience: 0 }, ..small() }.validate().is_err());
    }
}
