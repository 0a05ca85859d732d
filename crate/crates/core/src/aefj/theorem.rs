//! Cross-entropy versus mutual information on a noiseless channel.
//!
//! For uniform messages `m` and any decoder `q(m|y)`, `ln M − CE ≤ I(m; y)`.
//! With a deterministic encoder and no noise, `I(m; y) = H(y)`, the entropy
//! of the codeword partition, which is computed exactly here.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{decoder_specs, encoder_specs};
use crate::channel::{stream_rng, streams};
use crate::error::{Error, Result};
use crate::neuralnet::{cross_entropy, cross_entropy_grad, one_hot, AdamConfig, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiselessConfig {
    pub messages: usize,
    pub streams: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for NoiselessConfig {
    fn default() -> Self {
        Self {
            messages: 16,
            streams: 2,
            steps: 1500,
            batch: 64,
            lr: 1e-3,
            eval_every: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiselessPoint {
    pub step: usize,
    /// Expected cross-entropy under uniform messages.
    pub ce: f64,
    /// `ln M − CE`.
    pub lower_bound: f64,
    /// `H(y)` of the codeword partition.
    pub mutual_information: f64,
}

/// Entropy of the partition of rows into groups closer than `tol`, each row
/// carrying equal mass.
pub fn codeword_entropy(codewords: &Array2<f64>, tol: f64) -> f64 {
    let n = codewords.nrows();
    let mut group = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for i in 0..n {
        if group[i] != usize::MAX {
            continue;
        }
        group[i] = sizes.len();
        let mut size = 1;
        for j in i + 1..n {
            if group[j] == usize::MAX {
                let d: f64 = codewords.row(i).iter().zip(codewords.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if d <= tol {
                    group[j] = sizes.len();
                    size += 1;
                }
            }
        }
        sizes.push(size);
    }
    sizes.iter().map(|&s| {
        let p = s as f64 / n as f64;
        -p * p.ln()
    }).sum()
}

fn evaluate(encoder: &Network, decoder: &Network, m: usize, step: usize) -> Result<NoiselessPoint> {
    let all: Vec<usize> = (0..m).collect();
    let code = encoder.predict(&one_hot(&all, m))?;
    let ce = cross_entropy(&decoder.predict(&code)?, &all)?.loss;
    Ok(NoiselessPoint {
        step,
        ce,
        lower_bound: (m as f64).ln() - ce,
        mutual_information: codeword_entropy(&code, 1e-9),
    })
}

/// Trains encoder and decoder back to back through an identity channel and
/// records the bound at every `eval_every` steps and at the end.
pub fn train_noiseless(cfg: &NoiselessConfig) -> Result<Vec<NoiselessPoint>> {
    if cfg.messages < 2 || cfg.streams == 0 || cfg.batch < 2 || cfg.eval_every == 0 {
        return Err(Error::Argument("noiseless run needs M >= 2, streams >= 1, batch >= 2, eval_every >= 1".into()));
    }
    let m = cfg.messages;
    let mut encoder = Network::new(&encoder_specs(m, 64, cfg.streams), &mut stream_rng(cfg.seed, streams::INIT + 1))?;
    let mut decoder = Network::new(
        &decoder_specs(2 * cfg.streams, (256, 128), m),
        &mut stream_rng(cfg.seed, streams::INIT + 2),
    )?;
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut points = vec![evaluate(&encoder, &decoder, m, 0)?];
    for step in 1..=cfg.steps {
        let mut rng = stream_rng(cfg.seed, streams::TRAINING + step as u64);
        let labels: Vec<usize> = (0..cfg.batch).map(|_| rng.random_range(0..m)).collect();
        let code = encoder.forward(&one_hot(&labels, m), true)?;
        let probs = decoder.forward(&code, true)?;
        let (g_dec, g_code) = decoder.backward(&cross_entropy_grad(&probs, &labels)?)?;
        let (g_enc, _) = encoder.backward(&g_code)?;
        decoder.adam_step(&g_dec, &adam)?;
        encoder.adam_step(&g_enc, &adam)?;
        if step % cfg.eval_every == 0 || step == cfg.steps {
            points.push(evaluate(&encoder, &decoder, m, step)?);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_partitions() {
        let distinct = Array2::from_shape_fn((4, 2), |(i, j)| (i * 2 + j) as f64);
        assert!((codeword_entropy(&distinct, 1e-9) - 4f64.ln()).abs() < 1e-12);
        let same = Array2::zeros((4, 2));
        assert_eq!(codeword_entropy(&same, 1e-9), 0.0);
    }

    #[test]
    fn bound_holds_from_the_start() {
        let cfg = NoiselessConfig {
            steps: 100,
            eval_every: 20,
            ..NoiselessConfig::default()
        };
        for p in train_noiseless(&cfg).unwrap() {
            assert!(p.lower_bound <= p.mutual_information + 0.02, "{p:?}");
            assert!(p.lower_bound <= (16f64).ln());
        }
    }
}
