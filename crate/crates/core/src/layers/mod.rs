//! Forward and backward rules for every layer kind.
//!
//! Activations use NHWC layout: `[batch, height, width, channels]`. Fully
//! connected layers are 1x1 adder/conv layers over a `[batch, 1, 1, features]`
//! tensor.

pub mod activation;
pub mod adder;
pub mod batchnorm;
pub mod conv;
mod equivalence;
pub(crate) mod kernels;
pub mod loss;
pub mod pool;

pub use activation::{relu, relu_backward};
pub use adder::{adder_forward, adder_grad_filters, adder_grad_input, AdderLayerParams, GradientMode};
pub use batchnorm::{bn_backward, bn_forward, BatchNormParams, BnCache, Mode};
pub use conv::{conv_forward, conv_grad, ConvLayerParams};
pub use equivalence::l2_adder_conv_identity;
pub use loss::{predict_binary, sigmoid, sigmoid_bce, softmax_cross_entropy};
pub use pool::{maxpool_backward, maxpool_forward, PoolCache};

use crate::error::{Error, Result};
use crate::tensor::{ConvGeometry, Tensor};

/// Filter bank must be `[d, d, c_in, c_out]` with `d` equal to the geometry kernel.
pub(crate) fn check_filter_bank(filters: &Tensor, geometry: ConvGeometry) -> Result<()> {
    match *filters.shape() {
        [a, b, _, _] if a == geometry.kernel && b == geometry.kernel => {}
        _ => {
            return Err(Error::InvalidShape {
                shape: filters.shape().to_vec(),
                reason: format!("expected filters [{k}, {k}, c_in, c_out]", k = geometry.kernel),
            })
        }
    }
    if !filters.all_finite() {
        return Err(Error::NonFinite("filter bank".into()));
    }
    Ok(())
}

/// Resolved dimensions of one convolution-like call.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Plan {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub oh: usize,
    pub ow: usize,
    pub patch_len: usize,
    pub c_out: usize,
}

impl Plan {
    pub fn new(filters: &Tensor, geometry: ConvGeometry, input: &Tensor) -> Result<Plan> {
        let [n, h, w, c] = input.nhwc()?;
        let c_in = filters.shape()[2];
        if c != c_in {
            return Err(Error::ChannelMismatch {
                expected: c_in,
                actual: c,
            });
        }
        let (oh, ow) = geometry.output_hw(h, w)?;
        Ok(Plan {
            n,
            h,
            w,
            c,
            oh,
            ow,
            patch_len: geometry.patch_len(c),
            c_out: filters.shape()[3],
        })
    }

    pub fn positions(&self) -> usize {
        self.oh * self.ow
    }

    pub fn image_len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn output_shape(&self) -> Vec<usize> {
        vec![self.n, self.oh, self.ow, self.c_out]
    }
}
