//! Nesterov momentum with weight decay and per-layer adaptive scaling of
//! adder-filter gradients.
//!
//! For every parameter tensor `θ` with gradient `g`:
//!
//! ```text
//! g ← α g          (adder filters only, α = η √k / ‖g‖₂)
//! g ← g + λ θ      (filters only)
//! v ← m v + g
//! θ ← θ - lr (g + m v)
//! ```

mod schedule;

pub use schedule::{LrSchedule, PSchedule};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Gradients, Layer, LayerGrad, Network};
use crate::tensor::{reduce_l2_norm, Tensor};

/// `η √k / ‖g‖₂`, or 0 when `‖g‖₂ < 1e-12`.
pub fn adaptive_scale(grad: &Tensor, eta: f64) -> f64 {
    let norm = reduce_l2_norm(grad);
    if norm < 1e-12 {
        0.0
    } else {
        eta * (grad.len() as f64).sqrt() / norm
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub momentum: f64,
    pub weight_decay: f64,
    /// adaptive scaling of adder gradients; `None` disables it
    pub eta: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            momentum: 0.9,
            weight_decay: 5e-4,
            eta: Some(0.2),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!("weight decay {} is negative", self.weight_decay)));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::invalid(format!("eta {eta} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    /// one velocity buffer per layer, empty for parameter-free layers
    velocities: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(net: &Network, config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let velocities = net
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Adder(p) => vec![0.0; p.filters.len()],
                Layer::Conv(p) => vec![0.0; p.filters.len()],
                Layer::BatchNorm(p) => vec![0.0; 2 * p.channels()],
                _ => Vec::new(),
            })
            .collect();
        Ok(OptimizerState {
            config,
            velocities,
            step: 0,
        })
    }

    /// Applies one update with global learning rate `lr`.
    pub fn nag_step(&mut self, net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.layers.len() != self.velocities.len() || net.layers().len() != self.velocities.len() {
            return Err(Error::invalid("gradients do not match the network"));
        }
        let cfg = self.config;
        for ((layer, grad), vel) in net.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.velocities) {
            match (layer, grad) {
                (Layer::Adder(p), LayerGrad::Filters(g)) => {
                    g.expect_shape(p.filters.shape())?;
                    let alpha = cfg.eta.map_or(1.0, |eta| adaptive_scale(g, eta));
                    update(p.filters.data_mut(), g.data(), alpha, cfg.weight_decay, cfg.momentum, vel, lr);
                }
                (Layer::Conv(p), LayerGrad::Filters(g)) => {
                    g.expect_shape(p.filters.shape())?;
                    update(p.filters.data_mut(), g.data(), 1.0, cfg.weight_decay, cfg.momentum, vel, lr);
                }
                (Layer::BatchNorm(p), LayerGrad::BatchNorm { gamma, beta }) => {
                    let c = p.channels();
                    if gamma.len() != c || beta.len() != c {
                        return Err(Error::invalid("batch norm gradient length mismatch"));
                    }
                    let (vg, vb) = vel.split_at_mut(c);
                    update(&mut p.gamma, gamma, 1.0, 0.0, cfg.momentum, vg, lr);
                    update(&mut p.beta, beta, 1.0, 0.0, cfg.momentum, vb, lr);
                }
                (Layer::Relu | Layer::MaxPool(_) | Layer::Flatten, LayerGrad::None) => {}
                _ => return Err(Error::invalid("gradient kind does not match its layer")),
            }
        }
        self.step += 1;
        Ok(())
    }
}

fn update(theta: &mut [f64], grad: &[f64], scale: f64, decay: f64, momentum: f64, vel: &mut [f64], lr: f64) {
    for ((t, &g), v) in theta.iter_mut().zip(grad).zip(vel.iter_mut()) {
        let g = scale * g + decay * *t;
        *v = momentum * *v + g;
        *t -= lr * (g + momentum * *v);
    }
}
