//! Donsker-Varadhan mutual-information estimation and MINE-based FJ.
//!
//! The statistic network sees `concat(x, y)`. Joint samples are the aligned
//! pairs; marginal samples pair `x_i` with `y_{i+1 mod n}`.

mod fj;

pub use fj::{
    evaluate_outcome, gsc_track, mine_security_loss, train_mine_fj, MineFjConfig, MineFjHistory, MineFjOutcome, StopRule,
};

use ndarray::{s, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::neuralnet::{AdamConfig, LayerSpec, Network};

/// Decay of the running `E[e^T]` used for the bias-corrected gradient.
pub const EMA_DECAY: f64 = 0.99;

/// One evaluation of the DV bound, nats.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MiEstimate {
    pub value: f64,
    pub batch: usize,
    /// Mean of `T` over joint pairs.
    pub joint_term: f64,
    /// `ln mean e^T` over shuffled pairs.
    pub marginal_term: f64,
}

/// Exact mutual information of a bivariate Gaussian with correlation `rho`.
pub fn gaussian_mi_oracle(rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("correlation must satisfy |rho| < 1, got {rho}")));
    }
    Ok((-0.5 * (1.0 - rho * rho).ln()).abs())
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + (v.iter().map(|t| (t - m).exp()).sum::<f64>() / v.len() as f64).ln()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Statistic network plus the running denominator.
#[derive(Debug, Clone)]
pub struct MineEstimator {
    net: Network,
    x_dim: usize,
    y_dim: usize,
    /// `ln` of the running mean of `e^T` on marginal samples.
    log_ema: Option<f64>,
}

/// Estimate with gradients of the bound with respect to the inputs.
#[derive(Debug, Clone)]
pub struct MiInputGradient {
    pub estimate: MiEstimate,
    pub grad_x: Array2<f64>,
    pub grad_y: Array2<f64>,
}

impl MineEstimator {
    /// Two hidden ReLU layers of width `hidden` and a scalar output.
    pub fn new<R: Rng + ?Sized>(x_dim: usize, y_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if x_dim == 0 || y_dim == 0 || hidden == 0 {
            return Err(Error::Argument("estimator dimensions must be >= 1".into()));
        }
        let specs = [
            LayerSpec::Dense { input: x_dim + y_dim, output: hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { input: hidden, output: hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { input: hidden, output: 1 },
        ];
        Ok(Self {
            net: Network::new(&specs, rng)?,
            x_dim,
            y_dim,
            log_ema: None,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn pairs(&self, xs: &Array2<f64>, ys: &Array2<f64>) -> Result<Array2<f64>> {
        let n = xs.nrows();
        if n < 2 || ys.nrows() != n {
            return Err(Error::Argument(format!(
                "need aligned batches of at least 2 samples, got {} and {}",
                n,
                ys.nrows()
            )));
        }
        if xs.ncols() != self.x_dim || ys.ncols() != self.y_dim {
            return Err(Error::Argument(format!(
                "estimator expects ({}, {}) features, got ({}, {})",
                self.x_dim,
                self.y_dim,
                xs.ncols(),
                ys.ncols()
            )));
        }
        let mut z = Array2::zeros((2 * n, self.x_dim + self.y_dim));
        z.slice_mut(s![..n, ..self.x_dim]).assign(xs);
        z.slice_mut(s![n.., ..self.x_dim]).assign(xs);
        z.slice_mut(s![..n, self.x_dim..]).assign(ys);
        z.slice_mut(s![n..2 * n - 1, self.x_dim..]).assign(&ys.slice(s![1.., ..]));
        z.slice_mut(s![2 * n - 1, self.x_dim..]).assign(&ys.row(0));
        Ok(z)
    }

    fn bound(t: &Array2<f64>, n: usize) -> MiEstimate {
        let col = t.column(0);
        let joint_term = col.slice(s![..n]).mean().expect("n >= 2");
        let marg: Vec<f64> = col.slice(s![n..]).to_vec();
        let marginal_term = log_mean_exp(&marg);
        MiEstimate {
            value: joint_term - marginal_term,
            batch: n,
            joint_term,
            marginal_term,
        }
    }

    /// DV bound on `(xs, ys)` without changing the estimator.
    pub fn dv_estimate(&self, xs: &Array2<f64>, ys: &Array2<f64>) -> Result<MiEstimate> {
        let t = self.net.predict(&self.pairs(xs, ys)?)?;
        let est = Self::bound(&t, xs.nrows());
        if !est.value.is_finite() {
            return Err(Error::Divergence(format!("non-finite MI estimate {est:?}")));
        }
        Ok(est)
    }

    /// Forward pass and the gradient of `−bound` with respect to `T`, with the
    /// marginal weights `e^{T_i}/(n·EMA)`. Updates the running denominator
    /// when `update_ema` is set.
    fn loss_grad(&mut self, xs: &Array2<f64>, ys: &Array2<f64>, update_ema: bool) -> Result<(MiEstimate, Array2<f64>)> {
        let n = xs.nrows();
        let t = self.net.forward(&self.pairs(xs, ys)?, true)?;
        let est = Self::bound(&t, n);
        if !est.value.is_finite() {
            return Err(Error::Divergence(format!("non-finite MI estimate {est:?}")));
        }
        let log_ema = match self.log_ema {
            None => est.marginal_term,
            Some(prev) => log_add_exp(EMA_DECAY.ln() + prev, (1.0 - EMA_DECAY).ln() + est.marginal_term),
        };
        if update_ema {
            self.log_ema = Some(log_ema);
        }
        let mut g = Array2::zeros((2 * n, 1));
        let inv_n = 1.0 / n as f64;
        let ln_n = (n as f64).ln();
        for i in 0..n {
            g[(i, 0)] = -inv_n;
            g[(n + i, 0)] = (t[(n + i, 0)] - ln_n - log_ema).exp();
        }
        Ok((est, g))
    }

    /// One Adam step raising the bound on `(xs, ys)`.
    pub fn train_step(&mut self, xs: &Array2<f64>, ys: &Array2<f64>, adam: &AdamConfig) -> Result<MiEstimate> {
        let (est, g) = self.loss_grad(xs, ys, true)?;
        let (grads, _) = self.net.backward(&g)?;
        self.net.adam_step(&grads, adam)?;
        Ok(est)
    }

    /// Gradient of the bound with respect to both inputs; the estimator is
    /// left unchanged.
    pub fn input_gradient(&mut self, xs: &Array2<f64>, ys: &Array2<f64>) -> Result<MiInputGradient> {
        let n = xs.nrows();
        let (estimate, g) = self.loss_grad(xs, ys, false)?;
        let (_, gz) = self.net.backward(&g)?;
        // loss_grad gives d(−bound); flip to d(bound).
        let gz = -gz;
        let gx = &gz.slice(s![..n, ..self.x_dim]) + &gz.slice(s![n.., ..self.x_dim]);
        let mut gy = gz.slice(s![..n, self.x_dim..]).to_owned();
        let marg = gz.slice(s![n.., self.x_dim..]);
        for i in 0..n {
            // Marginal row i used y_{i+1}.
            let mut row = gy.row_mut((i + 1) % n);
            row += &marg.row(i);
        }
        Ok(MiInputGradient {
            estimate,
            grad_x: gx,
            grad_y: gy,
        })
    }

    /// Trains for `steps` on random minibatches of `(xs, ys)`.
    pub fn fit<R: Rng + ?Sized>(
        &mut self,
        xs: &Array2<f64>,
        ys: &Array2<f64>,
        steps: usize,
        minibatch: usize,
        adam: &AdamConfig,
        rng: &mut R,
    ) -> Result<Vec<MiEstimate>> {
        let n = xs.nrows();
        let mb = minibatch.min(n);
        (0..steps)
            .map(|_| {
                let idx: Vec<usize> = (0..mb).map(|_| rng.random_range(0..n)).collect();
                self.train_step(&xs.select(Axis(0), &idx), &ys.select(Axis(0), &idx), adam)
            })
            .collect()
    }
}

/// `(xs, ys)` scalar pairs with unit variances and correlation `rho`.
pub fn gaussian_pairs<R: Rng + ?Sized>(rho: f64, n: usize, rng: &mut R) -> (Array2<f64>, Array2<f64>) {
    use rand_distr::{Distribution, StandardNormal};
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    let mut xs = Array2::zeros((n, 1));
    let mut ys = Array2::zeros((n, 1));
    for i in 0..n {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        xs[(i, 0)] = a;
        ys[(i, 0)] = rho * a + c * b;
    }
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::stream_rng;

    #[test]
    fn oracle_values() {
        assert_eq!(gaussian_mi_oracle(0.0).unwrap(), 0.0);
        assert!((gaussian_mi_oracle(0.5).unwrap() - 0.143841).abs() < 1e-5);
        assert!((gaussian_mi_oracle(0.9).unwrap() - 0.830366).abs() < 1e-5);
        assert!(gaussian_mi_oracle(1.0).is_err());
    }

    fn zero_estimator() -> MineEstimator {
        let mut est = MineEstimator::new(1, 1, 8, &mut stream_rng(0, 0)).unwrap();
        for t in est.network_mut().params_mut().iter_mut().flatten() {
            t.fill(0.0);
        }
        est
    }

    #[test]
    fn constant_statistic_gives_zero() {
        let est = zero_estimator();
        let (x, y) = gaussian_pairs(0.5, 64, &mut stream_rng(1, 0));
        let e = est.dv_estimate(&x, &y).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn invariant_to_constant_shift() {
        let mut est = MineEstimator::new(1, 1, 8, &mut stream_rng(2, 0)).unwrap();
        let (x, y) = gaussian_pairs(0.5, 128, &mut stream_rng(3, 0));
        let a = est.dv_estimate(&x, &y).unwrap().value;
        let last = est.network().params().len() - 1;
        est.network_mut().params_mut()[last][1][(0, 0)] += 50.0;
        let b = est.dv_estimate(&x, &y).unwrap().value;
        assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn rejects_tiny_batches() {
        let est = zero_estimator();
        let x = Array2::zeros((1, 1));
        assert!(est.dv_estimate(&x, &x).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut est = MineEstimator::new(2, 1, 8, &mut stream_rng(4, 0)).unwrap();
        let (x1, y) = gaussian_pairs(0.7, 6, &mut stream_rng(5, 0));
        let mut x = Array2::zeros((6, 2));
        x.column_mut(0).assign(&x1.column(0));
        x.column_mut(1).fill(0.3);
        // Fix the running denominator at the current batch value so the
        // bias-corrected gradient equals the plain DV gradient.
        est.log_ema = Some(est.dv_estimate(&x, &y).unwrap().marginal_term);
        let g = est.input_gradient(&x, &y).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            for j in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[(i, j)] += h;
                xm[(i, j)] -= h;
                let num = (est.dv_estimate(&xp, &y).unwrap().value - est.dv_estimate(&xm, &y).unwrap().value) / (2.0 * h);
                assert!((num - g.grad_x[(i, j)]).abs() < 1e-6, "x ({i},{j}): {num} vs {}", g.grad_x[(i, j)]);
            }
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[(i, 0)] += h;
            ym[(i, 0)] -= h;
            let num = (est.dv_estimate(&x, &yp).unwrap().value - est.dv_estimate(&x, &ym).unwrap().value) / (2.0 * h);
            assert!((num - g.grad_y[(i, 0)]).abs() < 1e-6, "y {i}: {num} vs {}", g.grad_y[(i, 0)]);
        }
    }

    #[test]
    fn learns_positive_information_for_correlated_pair() {
        let mut rng = stream_rng(6, 0);
        let (x, y) = gaussian_pairs(0.9, 4000, &mut rng);
        let mut est = MineEstimator::new(1, 1, 32, &mut stream_rng(7, 0)).unwrap();
        est.fit(&x, &y, 300, 256, &AdamConfig::with_lr(5e-3), &mut rng).unwrap();
        let v = est.dv_estimate(&x, &y).unwrap().value;
        assert!(v > 0.4, "{v}");
    }
}
