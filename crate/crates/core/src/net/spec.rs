use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ConvGeometry;

/// Similarity used by feature-extraction layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Adder,
    Conv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Adder {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    BatchNorm,
    Relu,
    MaxPool {
        size: usize,
    },
    Flatten,
}

impl LayerSpec {
    /// A feature layer of the given kind.
    pub fn feature(kind: LayerKind, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        match kind {
            LayerKind::Adder => LayerSpec::Adder {
                out_channels,
                kernel,
                stride,
                padding,
            },
            LayerKind::Conv => LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            },
        }
    }

    /// Fully connected layer, expressed as a 1x1 feature layer.
    pub fn dense(kind: LayerKind, out_features: usize) -> Self {
        Self::feature(kind, out_features, 1, 1, 0)
    }

    /// Feature layers switched to `kind`; other layers unchanged.
    pub fn with_kind(self, kind: LayerKind) -> Self {
        match self {
            LayerSpec::Adder {
                out_channels,
                kernel,
                stride,
                padding,
            }
            | LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => Self::feature(kind, out_channels, kernel, stride, padding),
            other => other,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Adder { .. } => "adder",
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::BatchNorm => "bn",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub(crate) fn geometry(&self) -> Option<(usize, ConvGeometry)> {
        match *self {
            LayerSpec::Adder {
                out_channels,
                kernel,
                stride,
                padding,
            }
            | LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
            } => Some((out_channels, ConvGeometry { kernel, stride, padding })),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossHead {
    /// multiclass; logits `[n, 1, 1, k]`
    SoftmaxCrossEntropy,
    /// binary; one logit per sample
    SigmoidBce,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[height, width, channels]` of one sample
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub loss: LossHead,
}

impl NetworkSpec {
    /// Parses and validates a JSON spec.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("network spec: {e}")))?;
        spec.shapes()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Per-layer output shapes `[h, w, c]`, validating that adjacent layers compose.
    pub fn shapes(&self) -> Result<Vec<[usize; 3]>> {
        let [h0, w0, c0] = self.input;
        if h0 == 0 || w0 == 0 || c0 == 0 {
            return Err(Error::InvalidShape {
                shape: self.input.to_vec(),
                reason: "input extents must be positive".into(),
            });
        }
        let mut cur = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let [h, w, c] = cur;
            cur = match *layer {
                LayerSpec::Adder { .. } | LayerSpec::Conv { .. } => {
                    let (c_out, geom) = layer.geometry().expect("feature layer");
                    let geom = ConvGeometry::new(geom.kernel, geom.stride, geom.padding)?;
                    if c_out == 0 {
                        return Err(Error::invalid(format!("layer {i}: zero output channels")));
                    }
                    let (oh, ow) = geom.output_hw(h, w)?;
                    [oh, ow, c_out]
                }
                LayerSpec::BatchNorm | LayerSpec::Relu => cur,
                LayerSpec::MaxPool { size } => {
                    if size == 0 || size > h || size > w {
                        return Err(Error::WindowTooLarge {
                            kernel: size,
                            height: h,
                            width: w,
                        });
                    }
                    [h / size, w / size, c]
                }
                LayerSpec::Flatten => [1, 1, h * w * c],
            };
            out.push(cur);
        }
        let last = out.last().copied().unwrap_or(self.input);
        let want = match self.loss {
            LossHead::SigmoidBce => 1,
            LossHead::SoftmaxCrossEntropy => last[2].max(2),
        };
        if last[0] != 1 || last[1] != 1 || last[2] != want {
            return Err(Error::InvalidShape {
                shape: last.to_vec(),
                reason: format!("loss head {:?} needs a [1, 1, {want}] output", self.loss),
            });
        }
        Ok(out)
    }

    /// Every feature layer switched to `kind`.
    pub fn with_kind(&self, kind: LayerKind) -> Self {
        NetworkSpec {
            layers: self.layers.iter().map(|l| l.with_kind(kind)).collect(),
            ..self.clone()
        }
    }

    pub fn output_shape(&self) -> Result<[usize; 3]> {
        Ok(self.shapes()?.last().copied().unwrap_or(self.input))
    }

    /// Number of filter weights and of batch-norm parameters (γ and β).
    pub fn param_counts(&self) -> Result<(usize, usize)> {
        let shapes = self.shapes()?;
        let mut filters = 0;
        let mut bn = 0;
        let mut prev = self.input;
        for (layer, shape) in self.layers.iter().zip(&shapes) {
            if let Some((c_out, g)) = layer.geometry() {
                filters += g.kernel * g.kernel * prev[2] * c_out;
            }
            if matches!(layer, LayerSpec::BatchNorm) {
                bn += 2 * shape[2];
            }
            prev = *shape;
        }
        Ok((filters, bn))
    }

    /// LeNet-5 with batch normalization after every feature layer, on 32x32x1 input.
    ///
    /// `C1 5x5x6 → pool → C3 5x5x16 → pool → C5 5x5x120 → F6 84 → 10`, each
    /// feature layer followed by BN (and ReLU except the last). With
    /// `first_conv` the first layer stays multiplication-based.
    pub fn lenet5_bn(kind: LayerKind, first_conv: bool) -> Self {
        let first = if first_conv { LayerKind::Conv } else { kind };
        use LayerSpec::*;
        NetworkSpec {
            input: [32, 32, 1],
            layers: vec![
                LayerSpec::feature(first, 6, 5, 1, 0),
                BatchNorm,
                Relu,
                MaxPool { size: 2 },
                LayerSpec::feature(kind, 16, 5, 1, 0),
                BatchNorm,
                Relu,
                MaxPool { size: 2 },
                LayerSpec::feature(kind, 120, 5, 1, 0),
                BatchNorm,
                Relu,
                Flatten,
                LayerSpec::dense(kind, 84),
                BatchNorm,
                Relu,
                LayerSpec::dense(kind, 10),
                BatchNorm,
            ],
            loss: LossHead::SoftmaxCrossEntropy,
        }
    }

    /// Two-layer binary classifier on 2-D points with `hidden` units:
    /// `dense(hidden) → BN → ReLU → dense(1) → BN`.
    pub fn two_layer(kind: LayerKind, hidden: usize) -> Self {
        NetworkSpec {
            input: [1, 1, 2],
            layers: vec![
                LayerSpec::dense(kind, hidden),
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::dense(kind, 1),
                LayerSpec::BatchNorm,
            ],
            loss: LossHead::SigmoidBce,
        }
    }
}
