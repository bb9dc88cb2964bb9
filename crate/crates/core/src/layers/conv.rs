//! Multiplication-based reference layer: `Y(m,n,t) = Σ X(m+i,n+j,k) F(i,j,k,t)`.

use serde::{Deserialize, Serialize};

use super::kernels::{axpy, dot, transpose};
use super::Plan;
use crate::error::Result;
use crate::tensor::{col2im_accumulate, im2col_into, ConvGeometry, RngState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvLayerParams {
    /// `[d, d, c_in, c_out]`
    pub filters: Tensor,
    pub geometry: ConvGeometry,
}

impl ConvLayerParams {
    pub fn new(filters: Tensor, geometry: ConvGeometry) -> Result<Self> {
        super::check_filter_bank(&filters, geometry)?;
        Ok(ConvLayerParams { filters, geometry })
    }

    /// Filters drawn from `N(0, 1 / (d² c_in))`, which keeps output variance equal to input variance.
    pub fn init(rng: &mut RngState, geometry: ConvGeometry, c_in: usize, c_out: usize) -> Result<Self> {
        let d = geometry.kernel;
        let std = (1.0 / (d * d * c_in) as f64).sqrt();
        let filters = Tensor::randn(rng, &[d, d, c_in, c_out], 0.0, std)?;
        Self::new(filters, geometry)
    }

    pub fn in_channels(&self) -> usize {
        self.filters.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.filters.shape()[3]
    }
}

pub fn conv_forward(params: &ConvLayerParams, input: &Tensor) -> Result<Tensor> {
    let plan = Plan::new(&params.filters, params.geometry, input)?;
    let (k, cout) = (plan.patch_len, plan.c_out);
    let filters_t = transpose(params.filters.data(), k, cout);
    let out_len = plan.positions() * cout;
    let mut out = vec![0.0; plan.n * out_len];
    let mut patches = vec![0.0; plan.positions() * k];
    for (sample, out_s) in input
        .data()
        .chunks_exact(plan.image_len())
        .zip(out.chunks_exact_mut(out_len))
    {
        im2col_into(sample, plan.h, plan.w, plan.c, params.geometry, &mut patches);
        for (patch, row) in patches.chunks_exact(k).zip(out_s.chunks_exact_mut(cout)) {
            for (y, filt) in row.iter_mut().zip(filters_t.chunks_exact(k)) {
                *y = dot(patch, filt);
            }
        }
    }
    Ok(Tensor::from_parts(plan.output_shape(), out))
}

/// Exact gradients `(∂L/∂F, ∂L/∂X)` given `upstream = ∂L/∂Y`.
pub fn conv_grad(params: &ConvLayerParams, input: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor)> {
    let plan = Plan::new(&params.filters, params.geometry, input)?;
    upstream.expect_shape(&plan.output_shape())?;
    let (k, cout) = (plan.patch_len, plan.c_out);
    let filters_t = transpose(params.filters.data(), k, cout);
    let up_len = plan.positions() * cout;
    let mut grad_t = vec![0.0; cout * k];
    let mut dx = vec![0.0; input.len()];
    let mut patches = vec![0.0; plan.positions() * k];
    let mut dpatches = vec![0.0; plan.positions() * k];
    for ((sample, up), dx_s) in input
        .data()
        .chunks_exact(plan.image_len())
        .zip(upstream.data().chunks_exact(up_len))
        .zip(dx.chunks_exact_mut(plan.image_len()))
    {
        im2col_into(sample, plan.h, plan.w, plan.c, params.geometry, &mut patches);
        dpatches.fill(0.0);
        for ((patch, dpatch), u_row) in patches
            .chunks_exact(k)
            .zip(dpatches.chunks_exact_mut(k))
            .zip(up.chunks_exact(cout))
        {
            for (t, &u) in u_row.iter().enumerate() {
                if u != 0.0 {
                    axpy(u, patch, &mut grad_t[t * k..(t + 1) * k]);
                    axpy(u, &filters_t[t * k..(t + 1) * k], dpatch);
                }
            }
        }
        col2im_accumulate(&dpatches, plan.h, plan.w, plan.c, params.geometry, dx_s);
    }
    Ok((
        Tensor::from_parts(params.filters.shape().to_vec(), transpose(&grad_t, cout, k)),
        Tensor::from_parts(input.shape().to_vec(), dx),
    ))
}
