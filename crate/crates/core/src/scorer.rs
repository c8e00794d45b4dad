//! A small dual-head boundary scorer.
//!
//! Two same-padded 1-D convolutions (kernel 5, softplus activations) map
//! per-bin feature vectors to a hidden sequence. A logistic head is trained
//! with positively weighted binary cross-entropy and a linear head with
//! squared error, both against the same soft targets; predictions average
//! the two heads.
//!
//! Gradients are derived by hand and checked against central differences
//! by [`grad_check`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::types::{ScoreCurve, SoftTarget};
use crate::{Error, Result};

pub const KERNEL: usize = 5;
pub const DEFAULT_INPUT_DIM: usize = 16;
pub const DEFAULT_HIDDEN: usize = 32;

/// Floor applied to probabilities inside the logarithms of the BCE term.
const LOG_FLOOR: f64 = 1e-12;

/// A `T × d` matrix of per-bin features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub video_id: String,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn new(video_id: impl Into<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        let video_id = video_id.into();
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "features for {video_id:?}: {} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "features for {video_id:?} are not finite"
            )));
        }
        Ok(FeatureSequence {
            video_id,
            dim,
            data,
        })
    }

    pub fn from_rows(video_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let video_id = video_id.into();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid(format!(
                "features for {video_id:?} have ragged rows"
            )));
        }
        Self::new(video_id, dim, rows.concat())
    }

    /// Number of bins.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }
}

/// Same-padded 1-D convolution; weight layout `[out][in][kernel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Conv1d {
            out_channels,
            in_channels,
            kernel: KERNEL,
            weight: vec![0.0; out_channels * in_channels * KERNEL],
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    fn w(&self, o: usize, c: usize, k: usize) -> f64 {
        self.weight[(o * self.in_channels + c) * self.kernel + k]
    }

    /// `input` is `T × in_channels`; returns `T × out_channels` pre-activations.
    fn forward(&self, input: &[f64], len: usize) -> Vec<f64> {
        let (cin, cout, half) = (self.in_channels, self.out_channels, self.kernel / 2);
        let mut out = vec![0.0; len * cout];
        for t in 0..len {
            for o in 0..cout {
                let mut acc = self.bias[o];
                for k in 0..self.kernel {
                    let Some(s) = (t + k).checked_sub(half).filter(|&s| s < len) else {
                        continue;
                    };
                    let row = &input[s * cin..(s + 1) * cin];
                    let wrow = &self.weight[(o * cin) * self.kernel..];
                    for (c, &x) in row.iter().enumerate() {
                        acc += wrow[c * self.kernel + k] * x;
                    }
                }
                out[t * cout + o] = acc;
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input`.
    fn backward(&self, input: &[f64], len: usize, d_out: &[f64], grad: &mut Conv1d) -> Vec<f64> {
        let (cin, cout, half) = (self.in_channels, self.out_channels, self.kernel / 2);
        let mut d_in = vec![0.0; len * cin];
        for t in 0..len {
            for o in 0..cout {
                let g = d_out[t * cout + o];
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                for k in 0..self.kernel {
                    let Some(s) = (t + k).checked_sub(half).filter(|&s| s < len) else {
                        continue;
                    };
                    for c in 0..cin {
                        let idx = (o * cin + c) * self.kernel + k;
                        grad.weight[idx] += g * input[s * cin + c];
                        d_in[s * cin + c] += g * self.w(o, c, k);
                    }
                }
            }
        }
        d_in
    }
}

/// Linear map from the hidden width to one output per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Vec<f64>,
    pub bias: f64,
}

impl Linear {
    fn zeros(width: usize) -> Self {
        Linear {
            weight: vec![0.0; width],
            bias: 0.0,
        }
    }

    fn apply(&self, row: &[f64]) -> f64 {
        self.bias + self.weight.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// All scorer weights. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub head_bce: Linear,
    pub head_mse: Linear,
}

impl ScorerParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        ScorerParams {
            input_dim,
            hidden,
            conv1: Conv1d::zeros(hidden, input_dim),
            conv2: Conv1d::zeros(hidden, hidden),
            head_bce: Linear::zeros(hidden),
            head_mse: Linear::zeros(hidden),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization from a seeded generator.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(input_dim, hidden);
        let mut fill = |xs: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in xs {
                *x = rng.random_range(-bound..bound);
            }
        };
        fill(&mut p.conv1.weight, input_dim * KERNEL);
        fill(&mut p.conv1.bias, input_dim * KERNEL);
        fill(&mut p.conv2.weight, hidden * KERNEL);
        fill(&mut p.conv2.bias, hidden * KERNEL);
        fill(&mut p.head_bce.weight, hidden);
        fill(std::slice::from_mut(&mut p.head_bce.bias), hidden);
        fill(&mut p.head_mse.weight, hidden);
        fill(std::slice::from_mut(&mut p.head_mse.bias), hidden);
        p
    }

    /// Checks that every tensor has the size its declared shape implies.
    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden);
        let conv_ok = |c: &Conv1d, o: usize, i: usize| {
            c.out_channels == o
                && c.in_channels == i
                && c.kernel == KERNEL
                && c.weight.len() == o * i * KERNEL
                && c.bias.len() == o
        };
        if d == 0 || h == 0 {
            return Err(Error::invalid("scorer dimensions must be positive"));
        }
        if !conv_ok(&self.conv1, h, d)
            || !conv_ok(&self.conv2, h, h)
            || self.head_bce.weight.len() != h
            || self.head_mse.weight.len() != h
        {
            return Err(Error::invalid("scorer parameter shapes are inconsistent"));
        }
        if self.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scorer parameters are not finite"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.conv1.weight.len()
            + self.conv1.bias.len()
            + self.conv2.weight.len()
            + self.conv2.bias.len()
            + 2 * (self.hidden + 1)
    }

    /// All parameters in a fixed order: conv1, conv2, BCE head, MSE head
    /// (weights before bias in each).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(&self.conv1.weight);
        out.extend(&self.conv1.bias);
        out.extend(&self.conv2.weight);
        out.extend(&self.conv2.bias);
        out.extend(&self.head_bce.weight);
        out.push(self.head_bce.bias);
        out.extend(&self.head_mse.weight);
        out.push(self.head_mse.bias);
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut rest = flat;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(&mut self.conv1.weight);
        take(&mut self.conv1.bias);
        take(&mut self.conv2.weight);
        take(&mut self.conv2.bias);
        take(&mut self.head_bce.weight);
        take(std::slice::from_mut(&mut self.head_bce.bias));
        take(&mut self.head_mse.weight);
        take(std::slice::from_mut(&mut self.head_mse.bias));
    }

    fn add_scaled(&mut self, scale: f64, other: &ScorerParams) {
        let mut flat = self.flatten();
        for (a, b) in flat.iter_mut().zip(other.flatten()) {
            *a += scale * b;
        }
        self.unflatten(&flat);
    }
}

/// Update rule applied to the full-batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    Gd,
    /// Adam with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    #[default]
    Adam,
}

/// Loss weighting and optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight on the positive term of the BCE loss.
    pub pos_weight: f64,
    /// Weight of the squared-error head.
    pub mse_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            pos_weight: 8.0,
            mse_weight: 1.0,
            learning_rate: 0.01,
            epochs: 100,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pos_weight.is_nan() || self.pos_weight <= 0.0 {
            return Err(Error::invalid("pos_weight must be > 0"));
        }
        if self.mse_weight.is_nan() || self.mse_weight < 0.0 {
            return Err(Error::invalid("mse_weight must be >= 0"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Activations {
    len: usize,
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    act2: Vec<f64>,
    z_bce: Vec<f64>,
    z_mse: Vec<f64>,
}

fn check_features(params: &ScorerParams, features: &FeatureSequence) -> Result<()> {
    if features.dim() != params.input_dim {
        return Err(Error::invalid(format!(
            "features for {:?} have width {} but the scorer expects {}",
            features.video_id,
            features.dim(),
            params.input_dim
        )));
    }
    Ok(())
}

fn run(params: &ScorerParams, features: &FeatureSequence) -> Result<Activations> {
    check_features(params, features)?;
    let len = features.len();
    let pre1 = params.conv1.forward(&features.data, len);
    let act1: Vec<f64> = pre1.iter().map(|&x| softplus(x)).collect();
    let pre2 = params.conv2.forward(&act1, len);
    let act2: Vec<f64> = pre2.iter().map(|&x| softplus(x)).collect();
    let h = params.hidden;
    let z_bce = act2.chunks(h).map(|r| params.head_bce.apply(r)).collect();
    let z_mse = act2.chunks(h).map(|r| params.head_mse.apply(r)).collect();
    Ok(Activations {
        len,
        pre1,
        act1,
        pre2,
        act2,
        z_bce,
        z_mse,
    })
}

/// Raw head outputs: BCE logits and linear MSE outputs, one per bin.
pub fn forward(params: &ScorerParams, features: &FeatureSequence) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = run(params, features)?;
    Ok((a.z_bce, a.z_mse))
}

/// Per-bin score: mean of the BCE head probability and the MSE head
/// output clamped to `[0, 1]`.
pub fn combine_heads(z_bce: f64, z_mse: f64) -> f64 {
    (sigmoid(z_bce) + z_mse.clamp(0.0, 1.0)) / 2.0
}

pub fn predict(
    params: &ScorerParams,
    features: &FeatureSequence,
    bin_width_s: f64,
) -> Result<ScoreCurve> {
    let (zb, zm) = forward(params, features)?;
    let values = zb
        .iter()
        .zip(&zm)
        .map(|(&b, &m)| combine_heads(b, m))
        .collect();
    Ok(ScoreCurve::new(
        features.video_id.clone(),
        bin_width_s,
        values,
    ))
}

/// Per-bin weighted BCE on logit `z` against soft target `y`, and its derivative.
fn weighted_bce(z: f64, y: f64, pos_weight: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let q = sigmoid(-z);
    let (log_p, dlog_p) = if p > LOG_FLOOR {
        (p.ln(), q)
    } else {
        (LOG_FLOOR.ln(), 0.0)
    };
    let (log_q, dlog_q) = if q > LOG_FLOOR {
        (q.ln(), -p)
    } else {
        (LOG_FLOOR.ln(), 0.0)
    };
    let loss = -(pos_weight * y * log_p + (1.0 - y) * log_q);
    let grad = -(pos_weight * y * dlog_p + (1.0 - y) * dlog_q);
    (loss, grad)
}

fn check_target(features: &FeatureSequence, target: &SoftTarget) -> Result<()> {
    if target.len() != features.len() {
        return Err(Error::LengthMismatch {
            video_id: features.video_id.clone(),
            expected: features.len(),
            found: target.len(),
        });
    }
    Ok(())
}

fn head_losses(a: &Activations, target: &[f64], config: &LossConfig) -> (f64, Vec<f64>, Vec<f64>) {
    let n = a.len as f64;
    let mut loss = 0.0;
    let mut g_bce = Vec::with_capacity(a.len);
    let mut g_mse = Vec::with_capacity(a.len);
    for ((&y, &zb), &zm) in target.iter().zip(&a.z_bce).zip(&a.z_mse) {
        let (l, g) = weighted_bce(zb, y, config.pos_weight);
        let diff = zm - y;
        loss += (l + config.mse_weight * diff * diff) / n;
        g_bce.push(g / n);
        g_mse.push(2.0 * config.mse_weight * diff / n);
    }
    (loss, g_bce, g_mse)
}

/// Mean weighted BCE plus `mse_weight` times the mean squared error.
pub fn loss(
    params: &ScorerParams,
    features: &FeatureSequence,
    target: &SoftTarget,
    config: &LossConfig,
) -> Result<f64> {
    check_target(features, target)?;
    let a = run(params, features)?;
    Ok(head_losses(&a, &target.values, config).0)
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_grad(
    params: &ScorerParams,
    features: &FeatureSequence,
    target: &SoftTarget,
    config: &LossConfig,
) -> Result<(f64, ScorerParams)> {
    check_target(features, target)?;
    let a = run(params, features)?;
    let (loss, g_bce, g_mse) = head_losses(&a, &target.values, config);
    let h = params.hidden;
    let mut grad = ScorerParams::zeros(params.input_dim, h);

    let mut d_act2 = vec![0.0; a.len * h];
    for t in 0..a.len {
        let row = &a.act2[t * h..(t + 1) * h];
        grad.head_bce.bias += g_bce[t];
        grad.head_mse.bias += g_mse[t];
        for j in 0..h {
            grad.head_bce.weight[j] += g_bce[t] * row[j];
            grad.head_mse.weight[j] += g_mse[t] * row[j];
            d_act2[t * h + j] =
                g_bce[t] * params.head_bce.weight[j] + g_mse[t] * params.head_mse.weight[j];
        }
    }
    let d_pre2: Vec<f64> = d_act2
        .iter()
        .zip(&a.pre2)
        .map(|(g, &x)| g * sigmoid(x))
        .collect();
    let d_act1 = params
        .conv2
        .backward(&a.act1, a.len, &d_pre2, &mut grad.conv2);
    let d_pre1: Vec<f64> = d_act1
        .iter()
        .zip(&a.pre1)
        .map(|(g, &x)| g * sigmoid(x))
        .collect();
    params
        .conv1
        .backward(&features.data, a.len, &d_pre1, &mut grad.conv1);
    Ok((loss, grad))
}

/// Mean loss and gradient over a dataset. Per-sample work runs in parallel;
/// the reduction follows dataset order.
pub fn batch_loss_and_grad(
    params: &ScorerParams,
    dataset: &[(FeatureSequence, SoftTarget)],
    config: &LossConfig,
) -> Result<(f64, ScorerParams)> {
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let parts = dataset
        .par_iter()
        .map(|(f, y)| loss_and_grad(params, f, y, config))
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / dataset.len() as f64;
    let mut total = 0.0;
    let mut grad = ScorerParams::zeros(params.input_dim, params.hidden);
    for (l, g) in &parts {
        total += l * scale;
        grad.add_scaled(scale, g);
    }
    Ok((total, grad))
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Full-batch training for `config.epochs` epochs with the configured
/// update rule.
///
/// Returns the trained parameters and the loss before each update. The
/// dataset is processed in `video_id` order.
pub fn train(
    params: &ScorerParams,
    dataset: &[(FeatureSequence, SoftTarget)],
    config: &LossConfig,
) -> Result<(ScorerParams, Vec<f64>)> {
    config.validate()?;
    params.validate()?;
    let mut ordered: Vec<(FeatureSequence, SoftTarget)> = dataset.to_vec();
    ordered.sort_by(|a, b| a.0.video_id.cmp(&b.0.video_id));
    let mut params = params.clone();
    let mut history = Vec::with_capacity(config.epochs);
    let n = params.num_params();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    for epoch in 0..config.epochs {
        let (l, grad) = batch_loss_and_grad(&params, &ordered, config)?;
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss: l });
        }
        history.push(l);
        if config.learning_rate == 0.0 {
            continue;
        }
        match config.optimizer {
            Optimizer::Gd => params.add_scaled(-config.learning_rate, &grad),
            Optimizer::Adam => {
                let step = (epoch + 1) as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(step);
                let c2 = 1.0 - ADAM_BETA2.powi(step);
                let mut flat = params.flatten();
                for (i, g) in grad.flatten().into_iter().enumerate() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    flat[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
                params.unflatten(&flat);
            }
        }
    }
    Ok((params, history))
}

/// Step used by [`grad_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Largest relative disagreement between the analytic gradient and
/// central differences, `|ga - gn| / max(1e-8, |ga| + |gn|)`, over every
/// parameter.
pub fn grad_check(
    params: &ScorerParams,
    features: &FeatureSequence,
    target: &SoftTarget,
    config: &LossConfig,
) -> Result<f64> {
    let (_, analytic) = loss_and_grad(params, features, target, config)?;
    let analytic = analytic.flatten();
    let base = params.flatten();
    let errors = (0..base.len())
        .into_par_iter()
        .map(|i| {
            let mut probe = params.clone();
            let mut flat = base.clone();
            flat[i] = base[i] + GRAD_CHECK_STEP;
            probe.unflatten(&flat);
            let up = loss(&probe, features, target, config)?;
            flat[i] = base[i] - GRAD_CHECK_STEP;
            probe.unflatten(&flat);
            let down = loss(&probe, features, target, config)?;
            let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
            let a = analytic[i];
            Ok((a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}
