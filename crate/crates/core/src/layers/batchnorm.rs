//! Per-channel batch normalization over the last (channel) axis.
//!
//! Train mode normalizes with the biased batch variance
//! `σ²_B = (1/m) Σ (x_i - μ_B)²` and backpropagates through the batch
//! statistics; eval mode uses the running averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNormParams {
    pub const DEFAULT_EPS: f64 = 1e-5;
    pub const DEFAULT_MOMENTUM: f64 = 0.1;

    /// `γ = 1`, `β = 0`, running mean 0 and variance 1.
    pub fn new(channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("batch norm needs at least one channel"));
        }
        Ok(BatchNormParams {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: Self::DEFAULT_EPS,
            momentum: Self::DEFAULT_MOMENTUM,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.gamma.len();
        if c == 0 || self.beta.len() != c || self.running_mean.len() != c || self.running_var.len() != c {
            return Err(Error::invalid("batch norm parameter vectors disagree in length"));
        }
        if !(self.eps > 0.0) || !(self.momentum > 0.0 && self.momentum < 1.0) {
            return Err(Error::invalid(format!(
                "batch norm needs eps > 0 and momentum in (0, 1), got eps {} momentum {}",
                self.eps, self.momentum
            )));
        }
        if self.running_var.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("running variance must be non-negative"));
        }
        Ok(())
    }
}

/// Values saved by [`bn_forward`] for [`bn_backward`].
#[derive(Clone, Debug)]
pub struct BnCache {
    mode: Mode,
    shape: Vec<usize>,
    /// normalized input `x̂`
    x_hat: Vec<f64>,
    /// `1 / sqrt(σ² + eps)` per channel
    inv_std: Vec<f64>,
}

impl BnCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn inv_std(&self) -> &[f64] {
        &self.inv_std
    }
}

fn channel_count(params: &BatchNormParams, input: &Tensor) -> Result<usize> {
    let c = *input.shape().last().expect("tensors have rank >= 1");
    if c != params.channels() {
        return Err(Error::ChannelMismatch {
            expected: params.channels(),
            actual: c,
        });
    }
    Ok(c)
}

pub fn bn_forward(params: &mut BatchNormParams, input: &Tensor, mode: Mode) -> Result<(Tensor, BnCache)> {
    let c = channel_count(params, input)?;
    let m = input.len() / c;
    let (mean, var) = match mode {
        Mode::Train => {
            if m < 2 {
                return Err(Error::BatchTooSmall(m));
            }
            let mut mean = vec![0.0; c];
            for row in input.data().chunks_exact(c) {
                for (a, &x) in mean.iter_mut().zip(row) {
                    *a += x;
                }
            }
            mean.iter_mut().for_each(|a| *a /= m as f64);
            let mut var = vec![0.0; c];
            for row in input.data().chunks_exact(c) {
                for ((a, &x), &mu) in var.iter_mut().zip(row).zip(&mean) {
                    *a += (x - mu) * (x - mu);
                }
            }
            var.iter_mut().for_each(|a| *a /= m as f64);
            let unbias = m as f64 / (m - 1) as f64;
            let mom = params.momentum;
            for ch in 0..c {
                params.running_mean[ch] = (1.0 - mom) * params.running_mean[ch] + mom * mean[ch];
                params.running_var[ch] = (1.0 - mom) * params.running_var[ch] + mom * var[ch] * unbias;
            }
            (mean, var)
        }
        Mode::Eval => (params.running_mean.clone(), params.running_var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + params.eps).sqrt()).collect();
    let mut x_hat = vec![0.0; input.len()];
    let mut out = vec![0.0; input.len()];
    for ((row, xh), y) in input
        .data()
        .chunks_exact(c)
        .zip(x_hat.chunks_exact_mut(c))
        .zip(out.chunks_exact_mut(c))
    {
        for ch in 0..c {
            xh[ch] = (row[ch] - mean[ch]) * inv_std[ch];
            y[ch] = params.gamma[ch] * xh[ch] + params.beta[ch];
        }
    }
    Ok((
        Tensor::from_parts(input.shape().to_vec(), out),
        BnCache {
            mode,
            shape: input.shape().to_vec(),
            x_hat,
            inv_std,
        },
    ))
}

/// Returns `(∂L/∂x, ∂L/∂γ, ∂L/∂β)`.
///
/// In train mode: `∂L/∂x_i = γ/(m σ) (m g_i - Σ g_j - x̂_i Σ g_j x̂_j)`.
pub fn bn_backward(
    params: &BatchNormParams,
    cache: &BnCache,
    upstream: &Tensor,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    upstream.expect_shape(&cache.shape)?;
    let c = params.channels();
    if cache.inv_std.len() != c {
        return Err(Error::StaleTrace);
    }
    let m = upstream.len() / c;
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for (g, xh) in upstream.data().chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
        for ch in 0..c {
            dbeta[ch] += g[ch];
            dgamma[ch] += g[ch] * xh[ch];
        }
    }
    let mut dx = vec![0.0; upstream.len()];
    match cache.mode {
        Mode::Train => {
            let mf = m as f64;
            for ((d, g), xh) in dx
                .chunks_exact_mut(c)
                .zip(upstream.data().chunks_exact(c))
                .zip(cache.x_hat.chunks_exact(c))
            {
                for ch in 0..c {
                    let scale = params.gamma[ch] * cache.inv_std[ch] / mf;
                    d[ch] = scale * (mf * g[ch] - dbeta[ch] - xh[ch] * dgamma[ch]);
                }
            }
        }
        Mode::Eval => {
            for (d, g) in dx.chunks_exact_mut(c).zip(upstream.data().chunks_exact(c)) {
                for ch in 0..c {
                    d[ch] = params.gamma[ch] * cache.inv_std[ch] * g[ch];
                }
            }
        }
    }
    Ok((Tensor::from_parts(cache.shape.clone(), dx), dgamma, dbeta))
}
