//! Sequential networks: assembly, forward/backward with cached activations,
//! prediction, operation counts and checkpoints.

pub mod checkpoint;
mod ops;
mod spec;

pub use ops::{count_ops, LayerOps, OpCountReport};
pub use spec::{LayerKind, LayerSpec, LossHead, NetworkSpec};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::layers::{
    adder_forward, adder_grad_filters, adder_grad_input, bn_backward, bn_forward, conv_forward, conv_grad,
    maxpool_backward, maxpool_forward, relu, relu_backward, sigmoid_bce, softmax_cross_entropy, AdderLayerParams,
    BatchNormParams, BnCache, ConvLayerParams, GradientMode, Mode, PoolCache,
};
use crate::tensor::{ConvGeometry, RngState, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Adder(AdderLayerParams),
    Conv(ConvLayerParams),
    BatchNorm(BatchNormParams),
    Relu,
    MaxPool(usize),
    Flatten,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    /// changes whenever parameters may have changed; traces remember it
    version: u64,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Network {
            spec: self.spec.clone(),
            layers: self.layers.clone(),
            version: fresh_id(),
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.layers == other.layers
    }
}

/// Cached per-layer values from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    version: u64,
    inputs: Vec<Tensor>,
    aux: Vec<Aux>,
}

#[derive(Clone, Debug)]
enum Aux {
    None,
    Bn(BnCache),
    Pool(PoolCache),
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Input to layer `i`.
    pub fn input(&self, i: usize) -> &Tensor {
        &self.inputs[i]
    }
}

/// Gradient for one layer's parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerGrad {
    None,
    Filters(Tensor),
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Network {
    /// Initializes every layer from `rng`; deterministic per seed.
    pub fn build(spec: NetworkSpec, rng: &mut RngState) -> Result<Network> {
        let shapes = spec.shapes()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut prev = spec.input;
        for (ls, shape) in spec.layers.iter().zip(&shapes) {
            let layer = match *ls {
                LayerSpec::Adder { .. } => {
                    let (c_out, g) = ls.geometry().expect("feature layer");
                    Layer::Adder(AdderLayerParams::init(rng, g, prev[2], c_out)?)
                }
                LayerSpec::Conv { .. } => {
                    let (c_out, g) = ls.geometry().expect("feature layer");
                    Layer::Conv(ConvLayerParams::init(rng, g, prev[2], c_out)?)
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNormParams::new(shape[2])?),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool { size } => Layer::MaxPool(size),
                LayerSpec::Flatten => Layer::Flatten,
            };
            layers.push(layer);
            prev = *shape;
        }
        Ok(Network {
            spec,
            layers,
            version: fresh_id(),
        })
    }

    /// Assembles a network from explicit layers, checking them against `spec`.
    pub fn from_layers(spec: NetworkSpec, layers: Vec<Layer>) -> Result<Network> {
        let shapes = spec.shapes()?;
        if layers.len() != spec.layers.len() {
            return Err(Error::invalid("layer list does not match the spec"));
        }
        let mut prev = spec.input;
        for (i, ((ls, layer), shape)) in spec.layers.iter().zip(&layers).zip(&shapes).enumerate() {
            let ok = match (ls, layer) {
                (LayerSpec::Adder { .. }, Layer::Adder(p)) => filters_match(ls, &p.filters, p.geometry, prev[2]),
                (LayerSpec::Conv { .. }, Layer::Conv(p)) => filters_match(ls, &p.filters, p.geometry, prev[2]),
                (LayerSpec::BatchNorm, Layer::BatchNorm(p)) => p.validate().is_ok() && p.channels() == shape[2],
                (LayerSpec::Relu, Layer::Relu) | (LayerSpec::Flatten, Layer::Flatten) => true,
                (LayerSpec::MaxPool { size }, Layer::MaxPool(s)) => size == s,
                _ => false,
            };
            if !ok {
                return Err(Error::invalid(format!("layer {i} does not match its spec entry")));
            }
            prev = *shape;
        }
        Ok(Network {
            spec,
            layers,
            version: fresh_id(),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable parameter access; invalidates outstanding traces.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version = fresh_id();
        &mut self.layers
    }

    /// Sets the norm exponent of every adder layer.
    pub fn set_p(&mut self, p: f64) {
        for layer in self.layers_mut() {
            if let Layer::Adder(a) = layer {
                a.set_p(p);
            }
        }
    }

    /// Number of samples in `batch`, after checking its shape.
    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let [n, h, w, c] = batch.nhwc()?;
        if [h, w, c] != self.spec.input {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input.to_vec(),
                actual: vec![h, w, c],
            });
        }
        if !batch.all_finite() {
            return Err(Error::NonFinite("input batch".into()));
        }
        Ok(n)
    }

    /// Forward pass caching everything backward needs. Train mode updates
    /// batch-norm running statistics.
    pub fn forward(&mut self, batch: &Tensor, mode: Mode) -> Result<(Tensor, ForwardTrace)> {
        let n = self.check_batch(batch)?;
        let [h, w, c] = self.spec.input;
        let mut x = batch.clone().reshape(&[n, h, w, c])?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut aux = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (y, a) = layer_forward(layer, &x, mode)?;
            inputs.push(std::mem::replace(&mut x, y));
            aux.push(a);
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok((
            x,
            ForwardTrace {
                version: self.version,
                inputs,
                aux,
            },
        ))
    }

    /// Eval-mode forward without caching; running statistics are untouched.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let n = self.check_batch(batch)?;
        let [h, w, c] = self.spec.input;
        let mut x = batch.clone().reshape(&[n, h, w, c])?;
        for layer in &self.layers {
            x = match layer {
                Layer::BatchNorm(p) => bn_forward(&mut p.clone(), &x, Mode::Eval)?.0,
                other => layer_forward(&mut other.clone(), &x, Mode::Eval)?.0,
            };
        }
        Ok(x)
    }

    /// Loss of the network's head and its gradient with respect to `logits`.
    pub fn loss(&self, logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
        match self.spec.loss {
            LossHead::SoftmaxCrossEntropy => softmax_cross_entropy(logits, labels),
            LossHead::SigmoidBce => sigmoid_bce(logits, labels),
        }
    }

    /// Predicted class per sample from logits.
    pub fn classify(&self, logits: &Tensor) -> Vec<usize> {
        let k = *logits.shape().last().expect("rank >= 1");
        match self.spec.loss {
            LossHead::SigmoidBce => logits.data().iter().map(|&z| crate::layers::predict_binary(z)).collect(),
            LossHead::SoftmaxCrossEntropy => logits
                .data()
                .chunks_exact(k)
                .map(|row| {
                    let mut best = 0;
                    for (i, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = i;
                        }
                    }
                    best
                })
                .collect(),
        }
    }

    /// Backpropagates `loss_grad = ∂L/∂output` through the cached trace.
    /// Adder layers use the surrogate gradients selected by `mode`.
    pub fn backward(&self, trace: &ForwardTrace, loss_grad: &Tensor, mode: GradientMode) -> Result<Gradients> {
        Ok(self.backward_impl(trace, loss_grad, mode, false)?.0)
    }

    /// Like [`Network::backward`], also returning `∂L/∂input`.
    pub fn backward_full(
        &self,
        trace: &ForwardTrace,
        loss_grad: &Tensor,
        mode: GradientMode,
    ) -> Result<(Gradients, Tensor)> {
        let (grads, gx) = self.backward_impl(trace, loss_grad, mode, true)?;
        Ok((grads, gx.expect("input gradient requested")))
    }

    fn backward_impl(
        &self,
        trace: &ForwardTrace,
        loss_grad: &Tensor,
        mode: GradientMode,
        need_input: bool,
    ) -> Result<(Gradients, Option<Tensor>)> {
        if trace.version != self.version || trace.inputs.len() != self.layers.len() {
            return Err(Error::StaleTrace);
        }
        let mut g = loss_grad.clone();
        let mut grads = vec![LayerGrad::None; self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.inputs[i];
            g = match (layer, &trace.aux[i]) {
                (Layer::Adder(p), _) => {
                    grads[i] = LayerGrad::Filters(adder_grad_filters(p, x, &g, mode)?);
                    if i == 0 && !need_input {
                        return Ok((Gradients { layers: grads }, None));
                    }
                    adder_grad_input(p, x, &g)?
                }
                (Layer::Conv(p), _) => {
                    let (gf, gx) = conv_grad(p, x, &g)?;
                    grads[i] = LayerGrad::Filters(gf);
                    gx
                }
                (Layer::BatchNorm(p), Aux::Bn(cache)) => {
                    let (gx, gamma, beta) = bn_backward(p, cache, &g)?;
                    grads[i] = LayerGrad::BatchNorm { gamma, beta };
                    gx
                }
                (Layer::Relu, _) => relu_backward(x, &g)?,
                (Layer::MaxPool(_), Aux::Pool(cache)) => maxpool_backward(cache, &g)?,
                (Layer::Flatten, _) => g.reshape(x.shape())?,
                _ => return Err(Error::StaleTrace),
            };
        }
        Ok((Gradients { layers: grads }, Some(g)))
    }

    /// Flat copy of all trainable parameters (filters, then γ and β per BN layer, in layer order).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Adder(p) => out.extend_from_slice(p.filters.data()),
                Layer::Conv(p) => out.extend_from_slice(p.filters.data()),
                Layer::BatchNorm(p) => {
                    out.extend_from_slice(&p.gamma);
                    out.extend_from_slice(&p.beta);
                }
                _ => {}
            }
        }
        out
    }

    /// Inverse of [`Network::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.flat_params().len();
        if flat.len() != total {
            return Err(Error::ShapeMismatch {
                expected: vec![total],
                actual: vec![flat.len()],
            });
        }
        let mut at = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[at..at + dst.len()]);
            at += dst.len();
        };
        for layer in self.layers_mut() {
            match layer {
                Layer::Adder(p) => take(p.filters.data_mut()),
                Layer::Conv(p) => take(p.filters.data_mut()),
                Layer::BatchNorm(p) => {
                    take(&mut p.gamma);
                    take(&mut p.beta);
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Evaluates the eval-mode network on a uniform grid over `[x0, x1] × [y0, y1]`
    /// and returns class labels, row 0 at `y1` (top) and column 0 at `x0`.
    pub fn predict_grid(&self, bounds: [f64; 4], resolution: (usize, usize)) -> Result<Vec<Vec<usize>>> {
        if self.spec.input != [1, 1, 2] {
            return Err(Error::InvalidShape {
                shape: self.spec.input.to_vec(),
                reason: "grid prediction needs a 2-D input network".into(),
            });
        }
        let [x0, x1, y0, y1] = bounds;
        let (cols, rows) = resolution;
        if cols == 0 || rows == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::invalid("grid needs positive resolution and non-empty bounds"));
        }
        let coord = |lo: f64, hi: f64, i: usize, n: usize| {
            if n == 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let y = coord(y0, y1, rows - 1 - r, rows);
            let mut pts = Vec::with_capacity(cols * 2);
            for c in 0..cols {
                pts.push(coord(x0, x1, c, cols));
                pts.push(y);
            }
            let batch = Tensor::from_vec(&[cols, 1, 1, 2], pts)?;
            out.push(self.classify(&self.predict(&batch)?));
        }
        Ok(out)
    }
}

fn filters_match(ls: &LayerSpec, filters: &Tensor, g: ConvGeometry, c_in: usize) -> bool {
    let (c_out, want) = ls.geometry().expect("feature layer");
    g == want && filters.shape() == [g.kernel, g.kernel, c_in, c_out]
}

fn layer_forward(layer: &mut Layer, x: &Tensor, mode: Mode) -> Result<(Tensor, Aux)> {
    Ok(match layer {
        Layer::Adder(p) => (adder_forward(p, x)?, Aux::None),
        Layer::Conv(p) => (conv_forward(p, x)?, Aux::None),
        Layer::BatchNorm(p) => {
            let (y, cache) = bn_forward(p, x, mode)?;
            (y, Aux::Bn(cache))
        }
        Layer::Relu => (relu(x), Aux::None),
        Layer::MaxPool(size) => {
            let (y, cache) = maxpool_forward(x, *size)?;
            (y, Aux::Pool(cache))
        }
        Layer::Flatten => {
            let [n, h, w, c] = x.nhwc()?;
            (x.clone().reshape(&[n, 1, 1, h * w * c])?, Aux::None)
        }
    })
}
