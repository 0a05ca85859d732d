//! Small dense neural-network engine with reverse-mode gradients and Adam.
//!
//! Activations are `batch × dim` matrices. [`Network::forward`] caches what
//! [`Network::backward`] needs; [`Network::predict`] runs inference without
//! touching the cache.

mod checkpoint;
mod flops;
mod loss;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use flops::{flops, FlopReport, LayerFlops};
pub use loss::{
    cross_entropy, cross_entropy_grad, mse, soft_cross_entropy, soft_cross_entropy_grad, softmax_cross_entropy_grad,
    CrossEntropy, LOG_CLAMP,
};

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running-moment momentum for batch normalization.
pub const BN_MOMENTUM: f64 = 0.99;
/// Variance floor inside batch normalization.
pub const BN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense { input: usize, output: usize },
    Relu,
    BatchNorm { dim: usize },
    Softmax,
    /// Scales the batch so the mean squared row norm equals `target_power`.
    PowerNorm { target_power: f64 },
}

impl LayerSpec {
    /// Output width given the input width, or an error if they do not chain.
    fn output_dim(&self, input: usize) -> Result<usize> {
        match *self {
            LayerSpec::Dense { input: i, output } => {
                if i != input {
                    return Err(Error::Argument(format!("dense layer expects {i} inputs, previous layer gives {input}")));
                }
                if output == 0 {
                    return Err(Error::Argument("dense layer with zero outputs".into()));
                }
                Ok(output)
            }
            LayerSpec::BatchNorm { dim } => {
                if dim != input {
                    return Err(Error::Argument(format!("batch norm over {dim} features, previous layer gives {input}")));
                }
                Ok(dim)
            }
            LayerSpec::PowerNorm { target_power } => {
                if !(target_power > 0.0 && target_power.is_finite()) {
                    return Err(Error::Argument(format!("power target must be positive, got {target_power}")));
                }
                Ok(input)
            }
            LayerSpec::Relu | LayerSpec::Softmax => Ok(input),
        }
    }

    fn label(&self) -> String {
        match *self {
            LayerSpec::Dense { input, output } => format!("dense {input}->{output}"),
            LayerSpec::Relu => "relu".into(),
            LayerSpec::BatchNorm { dim } => format!("batch_norm {dim}"),
            LayerSpec::Softmax => "softmax".into(),
            LayerSpec::PowerNorm { target_power } => format!("power_norm {target_power}"),
        }
    }
}

/// Trainable tensors of one layer; biases and per-feature vectors are `1 × n`.
pub type LayerParams = Vec<Array2<f64>>;

/// Gradients with the same layout as [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<LayerParams>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self(net.params.iter().map(|p| p.iter().map(|t| Array2::zeros(t.raw_dim())).collect()).collect())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (ta, tb) in a.iter_mut().zip(b) {
                *ta += tb;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.0.iter_mut().flatten() {
            t.mapv_inplace(|x| x * s);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().flatten().flat_map(|t| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
enum Cache {
    None,
    Input(Array2<f64>),
    BatchNorm { x_hat: Array2<f64>, inv_std: Array1<f64> },
    /// Inference-mode batch norm: statistics are constants, so the layer is affine.
    FrozenBatchNorm { x_hat: Array2<f64>, inv_std: Array1<f64> },
    Output(Array2<f64>),
    PowerNorm { x: Array2<f64>, scale: f64, sum_sq: f64 },
}

/// Batch-norm running statistics (not trained by gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
struct AdamState {
    m: Vec<LayerParams>,
    v: Vec<LayerParams>,
    t: u64,
}

/// Feed-forward stack of [`LayerSpec`]s with parameters and optimizer state.
#[derive(Debug, Clone)]
pub struct Network {
    specs: Vec<LayerSpec>,
    params: Vec<LayerParams>,
    running: Vec<Option<RunningStats>>,
    cache: Vec<Cache>,
    opt: AdamState,
    input_dim: usize,
    output_dim: usize,
}

impl Network {
    /// Builds the stack with uniform `±sqrt(6/(in+out))` dense weights and
    /// zero biases. BatchNorm starts at `γ = 1, β = 0`.
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let input_dim = Self::chain_input(specs)?;
        let mut dim = input_dim;
        for s in specs {
            dim = s.output_dim(dim)?;
        }
        let mut params = Vec::with_capacity(specs.len());
        let mut running = Vec::with_capacity(specs.len());
        for s in specs {
            match *s {
                LayerSpec::Dense { input, output } => {
                    let bound = (6.0 / (input + output) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                    let w = Array2::from_shape_simple_fn((input, output), || dist.sample(rng));
                    params.push(vec![w, Array2::zeros((1, output))]);
                    running.push(None);
                }
                LayerSpec::BatchNorm { dim } => {
                    params.push(vec![Array2::ones((1, dim)), Array2::zeros((1, dim))]);
                    running.push(Some(RunningStats {
                        mean: Array1::zeros(dim),
                        var: Array1::ones(dim),
                    }));
                }
                _ => {
                    params.push(Vec::new());
                    running.push(None);
                }
            }
        }
        Ok(Self::assemble(specs.to_vec(), params, running, input_dim, dim))
    }

    fn chain_input(specs: &[LayerSpec]) -> Result<usize> {
        match specs.iter().find_map(|s| match *s {
            LayerSpec::Dense { input, .. } => Some(input),
            LayerSpec::BatchNorm { dim } => Some(dim),
            _ => None,
        }) {
            Some(d) if d > 0 => Ok(d),
            _ => Err(Error::Argument("network needs a dense or batch-norm layer to fix its input width".into())),
        }
    }

    fn assemble(
        specs: Vec<LayerSpec>,
        params: Vec<LayerParams>,
        running: Vec<Option<RunningStats>>,
        input_dim: usize,
        output_dim: usize,
    ) -> Self {
        let zeros: Vec<LayerParams> = params.iter().map(|p| p.iter().map(|t| Array2::zeros(t.raw_dim())).collect()).collect();
        let cache = vec![Cache::None; specs.len()];
        Self {
            specs,
            params,
            running,
            cache,
            opt: AdamState {
                m: zeros.clone(),
                v: zeros,
                t: 0,
            },
            input_dim,
            output_dim,
        }
    }

    /// Rebuilds a network from stored parameters, validating shapes.
    pub fn from_parts(specs: &[LayerSpec], params: Vec<LayerParams>, running: Vec<Option<RunningStats>>, steps: u64) -> Result<Self> {
        let mut probe = Self::new(specs, &mut crate::channel::stream_rng(0, 0))?;
        if params.len() != specs.len() || running.len() != specs.len() {
            return Err(Error::Argument("parameter table does not match layer count".into()));
        }
        for (i, (want, got)) in probe.params.iter().zip(&params).enumerate() {
            if want.len() != got.len() || want.iter().zip(got).any(|(a, b)| a.dim() != b.dim()) {
                return Err(Error::Argument(format!("parameter shapes of layer {i} ({}) do not match", specs[i].label())));
            }
        }
        for (i, (want, got)) in probe.running.iter().zip(&running).enumerate() {
            let ok = match (want, got) {
                (None, None) => true,
                (Some(a), Some(b)) => a.mean.len() == b.mean.len() && a.var.len() == b.var.len(),
                _ => false,
            };
            if !ok {
                return Err(Error::Argument(format!("running statistics of layer {i} do not match")));
            }
        }
        probe.params = params;
        probe.running = running;
        probe.opt.t = steps;
        Ok(probe)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[Option<RunningStats>] {
        &self.running
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Optimizer steps taken so far.
    pub fn steps(&self) -> u64 {
        self.opt.t
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(|t| t.len()).sum()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Argument(format!(
                "network expects {} input features, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Argument("empty batch".into()));
        }
        Ok(())
    }

    /// Forward pass caching intermediates. `training` selects batch
    /// statistics (and updates running moments) in batch-norm layers.
    pub fn forward(&mut self, x: &Array2<f64>, training: bool) -> Result<Array2<f64>> {
        self.forward_impl(x, training, training)
    }

    /// Training-mode forward pass that normalizes with batch statistics but
    /// leaves the running moments untouched.
    pub fn forward_frozen_stats(&mut self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.forward_impl(x, true, false)
    }

    fn forward_impl(&mut self, x: &Array2<f64>, training: bool, update_stats: bool) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.clone();
        for i in 0..self.specs.len() {
            let (out, cache) = self.layer_forward(i, a, training, update_stats)?;
            self.cache[i] = cache;
            a = out;
        }
        Ok(a)
    }

    /// Inference-mode forward pass; batch norm uses running moments.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.clone();
        for (i, spec) in self.specs.iter().enumerate() {
            a = match *spec {
                LayerSpec::Dense { .. } => dense(&a, &self.params[i]),
                LayerSpec::Relu => a.mapv(|v| v.max(0.0)),
                LayerSpec::Softmax => softmax_rows(&a),
                LayerSpec::PowerNorm { target_power } => power_norm(&a, target_power)?.0,
                LayerSpec::BatchNorm { .. } => {
                    let rs = self.running[i].as_ref().expect("batch norm has running stats");
                    let inv = rs.var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let x_hat = (&a - &rs.mean) * &inv;
                    affine(&x_hat, &self.params[i])
                }
            };
        }
        Ok(a)
    }

    fn layer_forward(&mut self, i: usize, a: Array2<f64>, training: bool, update_stats: bool) -> Result<(Array2<f64>, Cache)> {
        Ok(match self.specs[i] {
            LayerSpec::Dense { .. } => (dense(&a, &self.params[i]), Cache::Input(a)),
            LayerSpec::Relu => (a.mapv(|v| v.max(0.0)), Cache::Input(a)),
            LayerSpec::Softmax => {
                let p = softmax_rows(&a);
                (p.clone(), Cache::Output(p))
            }
            LayerSpec::PowerNorm { target_power } => {
                let (y, scale, sum_sq) = power_norm(&a, target_power)?;
                (y, Cache::PowerNorm { x: a, scale, sum_sq })
            }
            LayerSpec::BatchNorm { .. } => {
                let rs = self.running[i].as_mut().expect("batch norm has running stats");
                let (mean, var) = if training {
                    if a.nrows() < 2 {
                        return Err(Error::Argument("batch norm needs a batch of at least 2 in training mode".into()));
                    }
                    let mean = a.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = a.var_axis(Axis(0), 0.0);
                    if update_stats {
                        rs.mean = &rs.mean * BN_MOMENTUM + &mean * (1.0 - BN_MOMENTUM);
                        rs.var = &rs.var * BN_MOMENTUM + &var * (1.0 - BN_MOMENTUM);
                    }
                    (mean, var)
                } else {
                    (rs.mean.clone(), rs.var.clone())
                };
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let x_hat = (&a - &mean) * &inv_std;
                let y = affine(&x_hat, &self.params[i]);
                let cache = if training {
                    Cache::BatchNorm { x_hat, inv_std }
                } else {
                    Cache::FrozenBatchNorm { x_hat, inv_std }
                };
                (y, cache)
            }
        })
    }

    /// Backpropagates `grad_out` (gradient of the loss with respect to the
    /// last forward output). Returns parameter gradients and the gradient
    /// with respect to the network input.
    pub fn backward(&self, grad_out: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        if grad_out.ncols() != self.output_dim {
            return Err(Error::Argument(format!(
                "output gradient has {} columns, network outputs {}",
                grad_out.ncols(),
                self.output_dim
            )));
        }
        let mut grads: Vec<LayerParams> = vec![Vec::new(); self.specs.len()];
        let mut g = grad_out.clone();
        for i in (0..self.specs.len()).rev() {
            let spec = self.specs[i];
            g = match (&spec, &self.cache[i]) {
                (LayerSpec::Dense { .. }, Cache::Input(x)) => {
                    let w = &self.params[i][0];
                    let gw = x.t().dot(&g);
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let gx = g.dot(&w.t());
                    grads[i] = vec![gw, gb];
                    gx
                }
                (LayerSpec::Relu, Cache::Input(x)) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(x).for_each(|gv, &xv| {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    gx
                }
                (LayerSpec::Softmax, Cache::Output(p)) => {
                    let dot = (&g * p).sum_axis(Axis(1)).insert_axis(Axis(1));
                    (&g - &dot) * p
                }
                (LayerSpec::PowerNorm { .. }, Cache::PowerNorm { x, scale, sum_sq }) => {
                    // y = s x with s ∝ (Σx²)^(-1/2): dx = s g − s (Σ g·x / Σx²) x.
                    let gx_dot = (&g * x).sum();
                    &g * *scale - &(x * (*scale * gx_dot / sum_sq))
                }
                (LayerSpec::BatchNorm { .. }, Cache::BatchNorm { x_hat, inv_std } | Cache::FrozenBatchNorm { x_hat, inv_std }) => {
                    let gamma = self.params[i][0].row(0).to_owned();
                    let g_gamma = (&g * x_hat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let g_beta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    grads[i] = vec![g_gamma, g_beta];
                    let g_hat = &g * &gamma;
                    if matches!(self.cache[i], Cache::BatchNorm { .. }) {
                        let mean_g = g_hat.mean_axis(Axis(0)).expect("non-empty");
                        let mean_gx = (&g_hat * x_hat).mean_axis(Axis(0)).expect("non-empty");
                        (&g_hat - &mean_g - &(x_hat * &mean_gx)) * inv_std
                    } else {
                        g_hat * inv_std
                    }
                }
                _ => {
                    return Err(Error::Argument(format!(
                        "layer {i} ({}) has no cached forward pass",
                        spec.label()
                    )))
                }
            };
            if g.iter().any(|v| !v.is_finite()) || grads[i].iter().flat_map(|t| t.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!("non-finite gradient in layer {i} ({})", spec.label())));
            }
        }
        Ok((Gradients(grads), g))
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
        if grads.0.len() != self.params.len() {
            return Err(Error::Argument("gradient table does not match network".into()));
        }
        for (i, g) in grads.0.iter().enumerate() {
            if g.iter().flat_map(|t| t.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "non-finite gradient in layer {i} ({})",
                    self.specs[i].label()
                )));
            }
        }
        self.opt.t += 1;
        let t = self.opt.t as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (i, layer) in self.params.iter_mut().enumerate() {
            for (k, p) in layer.iter_mut().enumerate() {
                let g = &grads.0[i][k];
                let m = &mut self.opt.m[i][k];
                let v = &mut self.opt.v[i][k];
                Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    *p -= cfg.lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
                });
            }
        }
        if self.params.iter().flatten().flat_map(|t| t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Divergence("parameters became non-finite after an optimizer step".into()));
        }
        Ok(())
    }

    /// Resets Adam moments and the step counter.
    pub fn reset_optimizer(&mut self) {
        for t in self.opt.m.iter_mut().chain(self.opt.v.iter_mut()).flatten() {
            t.fill(0.0);
        }
        self.opt.t = 0;
    }
}

fn dense(x: &Array2<f64>, p: &LayerParams) -> Array2<f64> {
    x.dot(&p[0]) + &p[1]
}

fn affine(x_hat: &Array2<f64>, p: &LayerParams) -> Array2<f64> {
    x_hat * &p[0] + &p[1]
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// `(y, scale, Σx²)` with `y = scale·x` and mean squared row norm of `y`
/// equal to `target`.
fn power_norm(x: &Array2<f64>, target: f64) -> Result<(Array2<f64>, f64, f64)> {
    let sum_sq = x.iter().map(|v| v * v).sum::<f64>();
    if !(sum_sq > 0.0) {
        return Err(Error::Numerical("power normalization of an all-zero batch".into()));
    }
    let scale = (target * x.nrows() as f64 / sum_sq).sqrt();
    Ok((x * scale, scale, sum_sq))
}

/// Labelled batch for classification.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::Argument(format!(
                "{} inputs but {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Argument(format!("label {l} out of range for {classes} classes")));
        }
        Ok(Self { inputs, labels })
    }
}

/// One-hot rows for `labels`.
pub fn one_hot(labels: &[usize], classes: usize) -> Array2<f64> {
    let mut out = Array2::zeros((labels.len(), classes));
    for (r, &l) in labels.iter().enumerate() {
        out[(r, l)] = 1.0;
    }
    out
}

/// Largest relative error between `net.backward` and central differences of
/// `loss` for every parameter and input entry. `loss` returns the scalar loss
/// and its gradient with respect to the network output.
pub fn gradient_check<F>(net: &Network, x: &Array2<f64>, training: bool, h: f64, loss: F) -> Result<f64>
where
    F: Fn(&Array2<f64>) -> (f64, Array2<f64>),
{
    let mut work = net.clone();
    let out = work.forward(x, training)?;
    let (_, g_out) = loss(&out);
    let (grads, gx) = work.backward(&g_out)?;
    let eval = |n: &Network, xi: &Array2<f64>| -> Result<f64> {
        let mut n = n.clone();
        let o = n.forward(xi, training)?;
        Ok(loss(&o).0)
    };
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs().max(n.abs()).max(1e-6));
    let mut worst: f64 = 0.0;
    for i in 0..net.params.len() {
        for k in 0..net.params[i].len() {
            for idx in 0..net.params[i][k].len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                let (r, c) = (idx / net.params[i][k].ncols(), idx % net.params[i][k].ncols());
                plus.params[i][k][(r, c)] += h;
                minus.params[i][k][(r, c)] -= h;
                let num = (eval(&plus, x)? - eval(&minus, x)?) / (2.0 * h);
                worst = worst.max(rel(grads.0[i][k][(r, c)], num));
            }
        }
    }
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[(r, c)] += h;
            xm[(r, c)] -= h;
            let num = (eval(net, &xp)? - eval(net, &xm)?) / (2.0 * h);
            worst = worst.max(rel(gx[(r, c)], num));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::stream_rng;
    use rand_distr::StandardNormal;

    fn randn(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream_rng(seed, 0);
        Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
    }

    #[test]
    fn zero_weights_and_relu_give_zeros() {
        let mut net = Network::new(&[LayerSpec::Dense { input: 3, output: 4 }, LayerSpec::Relu], &mut stream_rng(0, 0)).unwrap();
        for t in net.params_mut()[0].iter_mut() {
            t.fill(0.0);
        }
        let y = net.forward(&randn(5, 3, 1), true).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax_rows(&Array2::zeros((1, 4)));
        assert!(p.iter().all(|v| (*v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn rejects_broken_chain() {
        let specs = [LayerSpec::Dense { input: 3, output: 4 }, LayerSpec::Dense { input: 5, output: 2 }];
        assert!(Network::new(&specs, &mut stream_rng(0, 0)).is_err());
        assert!(Network::new(&[LayerSpec::Relu], &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn input_width_checked() {
        let mut net = Network::new(&[LayerSpec::Dense { input: 3, output: 2 }], &mut stream_rng(0, 0)).unwrap();
        assert!(net.forward(&Array2::zeros((2, 4)), true).is_err());
    }

    #[test]
    fn batchnorm_constant_and_normal_batches() {
        let mut net = Network::new(&[LayerSpec::BatchNorm { dim: 3 }], &mut stream_rng(0, 0)).unwrap();
        let y = net.forward(&Array2::from_elem((8, 3), 2.5), true).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-12));

        let x = randn(4096, 3, 2);
        let y = net.forward(&x, true).unwrap();
        for c in y.columns() {
            let m = c.mean().unwrap();
            let v = c.var(0.0);
            assert!(m.abs() < 1e-6);
            assert!((v - 1.0).abs() < 1e-6);
        }
        assert!(net.forward(&Array2::zeros((1, 3)), true).is_err());
    }

    #[test]
    fn power_norm_hits_target() {
        let mut net = Network::new(
            &[LayerSpec::Dense { input: 3, output: 4 }, LayerSpec::PowerNorm { target_power: 2.0 }],
            &mut stream_rng(0, 0),
        )
        .unwrap();
        let y = net.forward(&randn(16, 3, 3), true).unwrap();
        let p = y.iter().map(|v| v * v).sum::<f64>() / 16.0;
        assert!((p - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_scalar_gradient_exact() {
        let mut net = Network::new(&[LayerSpec::Dense { input: 2, output: 1 }], &mut stream_rng(4, 0)).unwrap();
        let x = randn(3, 2, 5);
        let target = randn(3, 1, 6);
        let out = net.forward(&x, true).unwrap();
        let (_, g) = mse(&out, &target);
        let (grads, _) = net.backward(&g).unwrap();
        // d/dW of mean (xW + b − t)²
        let resid = &out - &target;
        let expect = x.t().dot(&resid) * (2.0 / 3.0);
        for (a, b) in grads.0[0][0].iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_check_every_layer_kind() {
        let specs = [
            LayerSpec::Dense { input: 4, output: 6 },
            LayerSpec::BatchNorm { dim: 6 },
            LayerSpec::Relu,
            LayerSpec::Dense { input: 6, output: 5 },
            LayerSpec::PowerNorm { target_power: 1.5 },
            LayerSpec::Dense { input: 5, output: 3 },
            LayerSpec::Softmax,
        ];
        let net = Network::new(&specs, &mut stream_rng(7, 0)).unwrap();
        let x = randn(6, 4, 8);
        let labels = vec![0, 1, 2, 0, 1, 2];
        let err = gradient_check(&net, &x, true, 1e-5, |p| {
            let ce = cross_entropy(p, &labels).unwrap();
            (ce.loss, cross_entropy_grad(p, &labels).unwrap())
        })
        .unwrap();
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn inference_batchnorm_gradient() {
        let specs = [LayerSpec::BatchNorm { dim: 3 }, LayerSpec::Dense { input: 3, output: 1 }];
        let mut net = Network::new(&specs, &mut stream_rng(9, 0)).unwrap();
        net.forward(&randn(32, 3, 10), true).unwrap();
        let x = randn(4, 3, 11);
        let t = randn(4, 1, 12);
        let err = gradient_check(&net, &x, false, 1e-5, |o| mse(o, &t)).unwrap();
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn predict_leaves_running_stats_alone() {
        let mut net = Network::new(&[LayerSpec::BatchNorm { dim: 2 }], &mut stream_rng(0, 0)).unwrap();
        net.forward(&randn(8, 2, 1), true).unwrap();
        let before = net.running_stats().to_vec();
        let a = net.predict(&randn(4, 2, 2)).unwrap();
        assert_eq!(before, net.running_stats());
        let b = net.forward(&randn(4, 2, 2), false).unwrap();
        assert_eq!(a, b);
        net.forward_frozen_stats(&randn(4, 2, 3)).unwrap();
        assert_eq!(before, net.running_stats());
    }

    #[test]
    fn adam_descends_on_square() {
        // One dense 1→1 with zero input: the bias is the free variable.
        let mut net = Network::new(&[LayerSpec::Dense { input: 1, output: 1 }], &mut stream_rng(0, 0)).unwrap();
        net.params_mut()[0][1][(0, 0)] = 1.0;
        let x = Array2::zeros((1, 1));
        let cfg = AdamConfig::with_lr(0.01);
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let y = net.forward(&x, true).unwrap();
            let f = y[(0, 0)] * y[(0, 0)];
            assert!(f < prev);
            prev = f;
            let (g, _) = net.backward(&(&y * 2.0)).unwrap();
            net.adam_step(&g, &cfg).unwrap();
        }
        assert_eq!(net.steps(), 100);
    }

    #[test]
    fn nan_gradient_names_layer() {
        let mut net = Network::new(&[LayerSpec::Dense { input: 2, output: 2 }], &mut stream_rng(0, 0)).unwrap();
        net.forward(&randn(2, 2, 0), true).unwrap();
        let err = net.backward(&Array2::from_elem((2, 2), f64::NAN)).unwrap_err();
        assert!(err.to_string().contains("dense 2->2"), "{err}");
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let specs = [LayerSpec::Dense { input: 3, output: 8 }, LayerSpec::Relu, LayerSpec::Dense { input: 8, output: 2 }];
            let mut net = Network::new(&specs, &mut stream_rng(5, 0)).unwrap();
            let x = randn(16, 3, 1);
            let t = randn(16, 2, 2);
            for _ in 0..20 {
                let y = net.forward(&x, true).unwrap();
                let (g, _) = net.backward(&mse(&y, &t).1).unwrap();
                net.adam_step(&g, &AdamConfig::default()).unwrap();
            }
            net.params().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn batch_validates_labels() {
        assert!(Batch::new(Array2::zeros((2, 3)), vec![0, 4], 4).is_err());
        assert!(Batch::new(Array2::zeros((2, 3)), vec![0], 4).is_err());
        assert!(Batch::new(Array2::zeros((2, 3)), vec![0, 3], 4).is_ok());
    }
}
