//! Losses and their gradients with respect to network outputs.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    /// Mean `−ln p[label]` over the batch, nats.
    pub loss: f64,
    /// Number of label probabilities that hit [`LOG_CLAMP`].
    pub clamped: usize,
}

fn check_labels(probs: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if probs.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::Argument(format!(
            "{} probability rows but {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= probs.ncols()) {
        return Err(Error::Argument(format!("label {l} out of range for {} classes", probs.ncols())));
    }
    Ok(())
}

/// Mean cross-entropy of `probs` against integer labels.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> Result<CrossEntropy> {
    check_labels(probs, labels)?;
    let mut clamped = 0;
    let mut total = 0.0;
    for (r, &l) in labels.iter().enumerate() {
        let p = probs[(r, l)];
        if p < LOG_CLAMP {
            clamped += 1;
        }
        total -= p.max(LOG_CLAMP).ln();
    }
    Ok(CrossEntropy {
        loss: total / labels.len() as f64,
        clamped,
    })
}

/// Gradient of [`cross_entropy`] with respect to `probs`.
pub fn cross_entropy_grad(probs: &Array2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    check_labels(probs, labels)?;
    let n = labels.len() as f64;
    let mut g = Array2::zeros(probs.raw_dim());
    for (r, &l) in labels.iter().enumerate() {
        g[(r, l)] = -1.0 / (n * probs[(r, l)].max(LOG_CLAMP));
    }
    Ok(g)
}

/// Gradient of softmax followed by cross-entropy, taken with respect to the
/// logits: `(p − onehot)/batch`.
pub fn softmax_cross_entropy_grad(probs: &Array2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    check_labels(probs, labels)?;
    let n = labels.len() as f64;
    let mut g = probs / n;
    for (r, &l) in labels.iter().enumerate() {
        g[(r, l)] -= 1.0 / n;
    }
    Ok(g)
}

/// Mean cross-entropy `−Σ_j t_j ln p_j` against soft target rows.
pub fn soft_cross_entropy(probs: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
    if probs.dim() != targets.dim() || probs.nrows() == 0 {
        return Err(Error::Argument("probabilities and targets differ in shape".into()));
    }
    let total: f64 = probs
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| if *t == 0.0 { 0.0 } else { -t * p.max(LOG_CLAMP).ln() })
        .sum();
    Ok(total / probs.nrows() as f64)
}

pub fn soft_cross_entropy_grad(probs: &Array2<f64>, targets: &Array2<f64>) -> Result<Array2<f64>> {
    if probs.dim() != targets.dim() || probs.nrows() == 0 {
        return Err(Error::Argument("probabilities and targets differ in shape".into()));
    }
    let n = probs.nrows() as f64;
    let mut g = Array2::zeros(probs.raw_dim());
    ndarray::Zip::from(&mut g).and(probs).and(targets).for_each(|g, &p, &t| {
        *g = -t / (n * p.max(LOG_CLAMP));
    });
    Ok(g)
}

/// Mean over the batch of the squared row error, and its gradient.
pub fn mse(out: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = out.nrows() as f64;
    let diff = out - target;
    let loss = diff.iter().map(|v| v * v).sum::<f64>() / n;
    (loss, diff * (2.0 / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{softmax_rows, LayerSpec, Network};
    use ndarray::array;

    #[test]
    fn ce_reference_values() {
        let onehot = array![[0.0, 1.0, 0.0]];
        assert_eq!(cross_entropy(&onehot, &[1]).unwrap().loss, 0.0);
        let uniform = Array2::from_elem((1, 16), 1.0 / 16.0);
        let ce = cross_entropy(&uniform, &[3]).unwrap().loss;
        assert!((ce - 16f64.ln()).abs() < 1e-12);

        let mut mixed = Array2::from_elem((2, 16), 1.0 / 16.0);
        mixed.row_mut(0).fill(0.0);
        mixed[(0, 5)] = 1.0;
        let ce = cross_entropy(&mixed, &[5, 9]).unwrap().loss;
        assert!((ce - 16f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ce_clamps_zero_probability() {
        let p = array![[1.0, 0.0]];
        let ce = cross_entropy(&p, &[1]).unwrap();
        assert_eq!(ce.clamped, 1);
        assert!((ce.loss + LOG_CLAMP.ln()).abs() < 1e-12);
        assert!(cross_entropy(&p, &[2]).is_err());
    }

    #[test]
    fn fused_gradient_matches_composed_path() {
        let spec = [LayerSpec::Dense { input: 3, output: 4 }, LayerSpec::Softmax];
        let mut net = Network::new(&spec, &mut crate::channel::stream_rng(1, 0)).unwrap();
        let x = array![[0.3, -1.0, 2.0], [1.5, 0.2, -0.7]];
        let labels = [2, 0];
        let p = net.forward(&x, true).unwrap();
        let (_, composed) = net.backward(&cross_entropy_grad(&p, &labels).unwrap()).unwrap();

        let mut logits_net = Network::new(&spec[..1], &mut crate::channel::stream_rng(1, 0)).unwrap();
        let logits = logits_net.forward(&x, true).unwrap();
        let fused = softmax_cross_entropy_grad(&softmax_rows(&logits), &labels).unwrap();
        let (_, direct) = logits_net.backward(&fused).unwrap();
        for (a, b) in composed.iter().zip(direct.iter()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn soft_ce_with_onehot_targets_matches_hard() {
        let p = array![[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]];
        let t = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let hard = cross_entropy(&p, &[1, 0]).unwrap().loss;
        assert!((soft_cross_entropy(&p, &t).unwrap() - hard).abs() < 1e-15);
        let gh = cross_entropy_grad(&p, &[1, 0]).unwrap();
        let gs = soft_cross_entropy_grad(&p, &t).unwrap();
        assert_eq!(gh, gs);
    }
}
