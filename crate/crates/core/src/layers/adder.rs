//! Adder layers: negated ℓp distance between input patches and filter templates.
//!
//! Forward: `Y(m,n,t) = -Σ |X(m+i,n+j,k) - F(i,j,k,t)|^p`, `p ∈ [1, 2]`.
//!
//! Backward uses the surrogate rules of the ℓ2→ℓ1 training procedure rather
//! than the exact derivative:
//!
//! * filters: `∂Y/∂F = X - F` for every `p` ([`GradientMode::FullPrecision`]),
//!   or `sgn(X - F)` ([`GradientMode::SignGrad`]);
//! * inputs: `∂Y/∂X = sgn(F - X) |F - X|^(p-1)`.
//!
//! For `p = 2` both surrogates equal half of the true derivative; for `p = 1`
//! the input rule is the exact subgradient away from `X = F`.

use serde::{Deserialize, Serialize};

use super::kernels::{axpy, dot, l1_dist, lp_dist, sgn, signed_pow, sq_dist, transpose};
use super::Plan;
use crate::error::{Error, Result};
use crate::tensor::{col2im_accumulate, im2col_into, ConvGeometry, RngState, Tensor};

/// Which filter gradient the backward pass produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientMode {
    /// `sgn(X - F)`, values in {-1, 0, +1}.
    SignGrad,
    /// `X - F`.
    FullPrecision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdderLayerParams {
    /// `[d, d, c_in, c_out]`
    pub filters: Tensor,
    pub geometry: ConvGeometry,
    p: f64,
}

impl AdderLayerParams {
    pub fn new(filters: Tensor, geometry: ConvGeometry, p: f64) -> Result<Self> {
        super::check_filter_bank(&filters, geometry)?;
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::invalid(format!("norm exponent p = {p} outside [1, 2]")));
        }
        Ok(AdderLayerParams { filters, geometry, p })
    }

    /// Standard-normal filters with `p = 1`.
    pub fn init(rng: &mut RngState, geometry: ConvGeometry, c_in: usize, c_out: usize) -> Result<Self> {
        let d = geometry.kernel;
        let filters = Tensor::randn(rng, &[d, d, c_in, c_out], 0.0, 1.0)?;
        Self::new(filters, geometry, 1.0)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Sets the norm exponent, clamped into `[1, 2]`.
    pub fn set_p(&mut self, p: f64) {
        self.p = if p.is_nan() { 1.0 } else { p.clamp(1.0, 2.0) };
    }

    pub fn in_channels(&self) -> usize {
        self.filters.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.filters.shape()[3]
    }
}

pub fn adder_forward(params: &AdderLayerParams, input: &Tensor) -> Result<Tensor> {
    let plan = Plan::new(&params.filters, params.geometry, input)?;
    let (k, cout) = (plan.patch_len, plan.c_out);
    let filters_t = transpose(params.filters.data(), k, cout);
    let mut out = vec![0.0; plan.n * plan.positions() * cout];
    let mut patches = vec![0.0; plan.positions() * k];
    let p = params.p;
    for (s, sample) in input.data().chunks_exact(plan.image_len()).enumerate() {
        im2col_into(sample, plan.h, plan.w, plan.c, params.geometry, &mut patches);
        let out_s = &mut out[s * plan.positions() * cout..][..plan.positions() * cout];
        for (patch, row) in patches.chunks_exact(k).zip(out_s.chunks_exact_mut(cout)) {
            for (y, filt) in row.iter_mut().zip(filters_t.chunks_exact(k)) {
                let dist = if p == 1.0 {
                    l1_dist(patch, filt)
                } else if p == 2.0 {
                    sq_dist(patch, filt)
                } else {
                    lp_dist(patch, filt, p)
                };
                *y = -dist;
            }
        }
    }
    Ok(Tensor::from_parts(plan.output_shape(), out))
}

/// Filter gradient, shaped like `params.filters`.
pub fn adder_grad_filters(
    params: &AdderLayerParams,
    input: &Tensor,
    upstream: &Tensor,
    mode: GradientMode,
) -> Result<Tensor> {
    let plan = Plan::new(&params.filters, params.geometry, input)?;
    upstream.expect_shape(&plan.output_shape())?;
    let (k, cout) = (plan.patch_len, plan.c_out);
    let filters_t = transpose(params.filters.data(), k, cout);
    let mut grad_t = vec![0.0; cout * k];
    let mut patches = vec![0.0; plan.positions() * k];
    let up_len = plan.positions() * cout;
    match mode {
        GradientMode::FullPrecision => {
            // Σ_P u(P,t) (X_P - F_t) = Σ_P u(P,t) X_P - F_t Σ_P u(P,t)
            let mut up_sums = vec![0.0; cout];
            for (sample, up) in input
                .data()
                .chunks_exact(plan.image_len())
                .zip(upstream.data().chunks_exact(up_len))
            {
                im2col_into(sample, plan.h, plan.w, plan.c, params.geometry, &mut patches);
                for (patch, u_row) in patches.chunks_exact(k).zip(up.chunks_exact(cout)) {
                    for (t, &u) in u_row.iter().enumerate() {
                        if u != 0.0 {
                            axpy(u, patch, &mut grad_t[t * k..(t + 1) * k]);
                            up_sums[t] += u;
                        }
                    }
                }
            }
            for (t, &total) in up_sums.iter().enumerate() {
                axpy(-total, &filters_t[t * k..(t + 1) * k], &mut grad_t[t * k..(t + 1) * k]);
            }
        }
        GradientMode::SignGrad => {
            for (sample, up) in input
                .data()
                .chunks_exact(plan.image_len())
                .zip(upstream.data().chunks_exact(up_len))
            {
                im2col_into(sample, plan.h, plan.w, plan.c, params.geometry, &mut patches);
                for (patch, u_row) in patches.chunks_exact(k).zip(up.chunks_exact(cout)) {
                    for (t, &u) in u_row.iter().enumerate() {
                        if u == 0.0 {
                            continue;
                        }
                        let filt = &filters_t[t * k..(t + 1) * k];
                        for ((g, &x), &f) in grad_t[t * k..(t + 1) * k].iter_mut().zip(patch).zip(filt) {
                            *g += u * sgn(x - f);
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(
        params.filters.shape().to_vec(),
        transpose(&grad_t, cout, k),
    ))
}

/// Input gradient, shaped like `input`.
pub fn adder_grad_input(params: &AdderLayerParams, input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    let plan = Plan::new(&params.filters, params.geometry, input)?;
    upstream.expect_shape(&plan.output_shape())?;
    let (k, cout) = (plan.patch_len, plan.c_out);
    let filters_t = transpose(params.filters.data(), k, cout);
    let p = params.p;
    let up_len = plan.positions() * cout;
    let mut patches = vec![0.0; plan.positions() * k];
    let mut dpatches = vec![0.0; plan.positions() * k];
    let mut dx = vec![0.0; input.len()];
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
            if p == 2.0 {
                // Σ_t u_t (F_t - X) = Σ_t u_t F_t - X Σ_t u_t
                let mut total = 0.0;
                for (t, &u) in u_row.iter().enumerate() {
                    if u != 0.0 {
                        axpy(u, &filters_t[t * k..(t + 1) * k], dpatch);
                        total += u;
                    }
                }
                axpy(-total, patch, dpatch);
            } else if p == 1.0 {
                for (t, &u) in u_row.iter().enumerate() {
                    if u == 0.0 {
                        continue;
                    }
                    let filt = &filters_t[t * k..(t + 1) * k];
                    for ((g, &x), &f) in dpatch.iter_mut().zip(patch).zip(filt) {
                        *g += u * sgn(f - x);
                    }
                }
            } else {
                let e = p - 1.0;
                for (t, &u) in u_row.iter().enumerate() {
                    if u == 0.0 {
                        continue;
                    }
                    let filt = &filters_t[t * k..(t + 1) * k];
                    for ((g, &x), &f) in dpatch.iter_mut().zip(patch).zip(filt) {
                        *g += u * signed_pow(f - x, e);
                    }
                }
            }
        }
        col2im_accumulate(&dpatches, plan.h, plan.w, plan.c, params.geometry, dx_s);
    }
    Ok(Tensor::from_parts(input.shape().to_vec(), dx))
}

/// Exact `∂Y/∂F` for `p = 2`, used to cross-check the surrogate in tests.
#[cfg(test)]
pub(crate) fn exact_l2_filter_grad(params: &AdderLayerParams, input: &Tensor, upstream: &Tensor) -> Tensor {
    let mut g = adder_grad_filters(params, input, upstream, GradientMode::FullPrecision).unwrap();
    g.scale(2.0);
    g
}

/// Squared ℓ2 norm of every receptive field, in output order.
pub(crate) fn patch_sq_norms(input: &Tensor, geometry: ConvGeometry) -> Result<Vec<f64>> {
    let [n, h, w, c] = input.nhwc()?;
    let (oh, ow) = geometry.output_hw(h, w)?;
    let k = geometry.patch_len(c);
    let mut patches = vec![0.0; oh * ow * k];
    let mut out = Vec::with_capacity(n * oh * ow);
    for sample in input.data().chunks_exact(h * w * c) {
        im2col_into(sample, h, w, c, geometry, &mut patches);
        out.extend(patches.chunks_exact(k).map(|p| dot(p, p)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::gradcheck::central_difference;

    fn scalar_layer(f: f64, p: f64) -> AdderLayerParams {
        AdderLayerParams::new(
            Tensor::from_vec(&[1, 1, 1, 1], vec![f]).unwrap(),
            ConvGeometry::new(1, 1, 0).unwrap(),
            p,
        )
        .unwrap()
    }

    fn scalar(x: f64) -> Tensor {
        Tensor::from_vec(&[1, 1, 1, 1], vec![x]).unwrap()
    }

    #[test]
    fn forward_hand_values() {
        // p = 1: -|3 - 1| = -2
        let y = adder_forward(&scalar_layer(1.0, 1.0), &scalar(3.0)).unwrap();
        assert_eq!(y.data(), &[-2.0]);
        // p = 2: patch [1, -2], filter [0, 0] -> -(1 + 4)
        let layer = AdderLayerParams::new(
            Tensor::zeros(&[1, 1, 2, 1]).unwrap(),
            ConvGeometry::new(1, 1, 0).unwrap(),
            2.0,
        )
        .unwrap();
        let x = Tensor::from_vec(&[1, 1, 1, 2], vec![1.0, -2.0]).unwrap();
        assert_eq!(adder_forward(&layer, &x).unwrap().data(), &[-5.0]);
    }

    #[test]
    fn patch_equal_to_filter_gives_zero() {
        let mut rng = RngState::new(1);
        let f = Tensor::randn(&mut rng, &[2, 2, 3, 1], 0.0, 1.0).unwrap();
        let x = f.clone().reshape(&[1, 2, 2, 3]).unwrap();
        for p in [1.0, 1.5, 2.0] {
            let layer = AdderLayerParams::new(f.clone(), ConvGeometry::new(2, 1, 0).unwrap(), p).unwrap();
            assert_eq!(adder_forward(&layer, &x).unwrap().data(), &[0.0]);
            let up = Tensor::full(&[1, 1, 1, 1], 1.0).unwrap();
            for mode in [GradientMode::SignGrad, GradientMode::FullPrecision] {
                let g = adder_grad_filters(&layer, &x, &up, mode).unwrap();
                assert!(g.data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn output_never_positive() {
        let mut rng = RngState::new(2);
        for p in [1.0, 1.3, 2.0] {
            let mut layer = AdderLayerParams::init(&mut rng, ConvGeometry::new(3, 1, 1).unwrap(), 2, 4).unwrap();
            layer.set_p(p);
            let x = Tensor::randn(&mut rng, &[2, 5, 5, 2], 0.0, 2.0).unwrap();
            let y = adder_forward(&layer, &x).unwrap();
            assert_eq!(y.shape(), &[2, 5, 5, 4]);
            assert!(y.data().iter().all(|&v| v <= 0.0));
        }
    }

    #[test]
    fn filter_grad_hand_values() {
        let up = Tensor::full(&[1, 1, 1, 1], 1.0).unwrap();
        let layer = scalar_layer(1.0, 1.0);
        let full = adder_grad_filters(&layer, &scalar(3.0), &up, GradientMode::FullPrecision).unwrap();
        assert_eq!(full.data(), &[2.0]);
        let sign = adder_grad_filters(&layer, &scalar(3.0), &up, GradientMode::SignGrad).unwrap();
        assert_eq!(sign.data(), &[1.0]);
    }

    #[test]
    fn input_grad_hand_values() {
        let up = Tensor::full(&[1, 1, 1, 1], 1.0).unwrap();
        let g2 = adder_grad_input(&scalar_layer(1.0, 2.0), &scalar(3.0), &up).unwrap();
        assert_eq!(g2.data(), &[-2.0]);
        let g1 = adder_grad_input(&scalar_layer(1.0, 1.0), &scalar(3.0), &up).unwrap();
        assert_eq!(g1.data(), &[-1.0]);
        let g15 = adder_grad_input(&scalar_layer(1.0, 1.5), &scalar(3.0), &up).unwrap();
        assert!((g15.data()[0] + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sign_grad_values_are_ternary() {
        let mut rng = RngState::new(3);
        let layer = AdderLayerParams::init(&mut rng, ConvGeometry::new(1, 1, 0).unwrap(), 3, 2).unwrap();
        let x = Tensor::randn(&mut rng, &[1, 1, 1, 3], 0.0, 1.0).unwrap();
        let up = Tensor::full(&[1, 1, 1, 2], 1.0).unwrap();
        let g = adder_grad_filters(&layer, &x, &up, GradientMode::SignGrad).unwrap();
        assert!(g.data().iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
    }

    #[test]
    fn channel_mismatch_rejected() {
        let mut rng = RngState::new(4);
        let layer = AdderLayerParams::init(&mut rng, ConvGeometry::new(1, 1, 0).unwrap(), 3, 2).unwrap();
        let x = Tensor::zeros(&[1, 2, 2, 2]).unwrap();
        assert!(matches!(adder_forward(&layer, &x), Err(Error::ChannelMismatch { .. })));
        let x = Tensor::zeros(&[1, 2, 2, 3]).unwrap();
        let bad_up = Tensor::zeros(&[1, 2, 2, 3]).unwrap();
        assert!(adder_grad_input(&layer, &x, &bad_up).is_err());
    }

    #[test]
    fn p_outside_range_rejected_and_clamped() {
        let f = Tensor::zeros(&[1, 1, 1, 1]).unwrap();
        let g = ConvGeometry::new(1, 1, 0).unwrap();
        assert!(AdderLayerParams::new(f.clone(), g, 0.5).is_err());
        let mut layer = AdderLayerParams::new(f, g, 1.0).unwrap();
        layer.set_p(3.0);
        assert_eq!(layer.p(), 2.0);
        layer.set_p(0.2);
        assert_eq!(layer.p(), 1.0);
    }

    // Finite differences of L = <w, Y> against the surrogate gradients.
    fn probe(p: f64, seed: u64) -> (AdderLayerParams, Tensor, Tensor) {
        let mut rng = RngState::new(seed);
        let mut layer = AdderLayerParams::init(&mut rng, ConvGeometry::new(2, 1, 1).unwrap(), 2, 3).unwrap();
        layer.set_p(p);
        let x = Tensor::randn(&mut rng, &[2, 3, 3, 2], 0.0, 1.0).unwrap();
        let w = Tensor::randn(&mut rng, &[2, 4, 4, 3], 0.0, 1.0).unwrap();
        (layer, x, w)
    }

    #[test]
    fn p2_surrogates_are_half_the_true_gradient() {
        for seed in 0..5 {
            let (layer, x, w) = probe(2.0, seed);
            let gf = exact_l2_filter_grad(&layer, &x, &w);
            let gx = adder_grad_input(&layer, &x, &w).unwrap();
            let loss_f = |theta: &[f64]| {
                let mut l = layer.clone();
                l.filters.data_mut().copy_from_slice(theta);
                adder_forward(&l, &x).unwrap().dot(&w).unwrap()
            };
            let loss_x = |theta: &[f64]| {
                let xx = Tensor::from_vec(x.shape(), theta.to_vec()).unwrap();
                adder_forward(&layer, &xx).unwrap().dot(&w).unwrap()
            };
            for (i, &g) in gf.data().iter().enumerate() {
                let fd = central_difference(&loss_f, layer.filters.data(), i, 1e-6);
                assert!((fd - g).abs() <= 1e-5 * fd.abs().max(g.abs()).max(1e-8), "F[{i}] {fd} vs {g}");
            }
            for (i, &g) in gx.data().iter().enumerate() {
                let fd = central_difference(&loss_x, x.data(), i, 1e-6);
                let g2 = 2.0 * g;
                assert!((fd - g2).abs() <= 1e-5 * fd.abs().max(g2.abs()).max(1e-8), "X[{i}] {fd} vs {g2}");
            }
        }
    }

    #[test]
    fn p1_input_grad_is_exact_subgradient() {
        let (layer, x, w) = probe(1.0, 9);
        let gx = adder_grad_input(&layer, &x, &w).unwrap();
        let loss_x = |theta: &[f64]| {
            let xx = Tensor::from_vec(x.shape(), theta.to_vec()).unwrap();
            adder_forward(&layer, &xx).unwrap().dot(&w).unwrap()
        };
        for (i, &g) in gx.data().iter().enumerate() {
            let fd = central_difference(&loss_x, x.data(), i, 1e-6);
            assert!((fd - g).abs() <= 1e-5 * fd.abs().max(g.abs()).max(1e-8), "X[{i}] {fd} vs {g}");
        }
    }

    #[test]
    fn fractional_p_input_grad_scales_true_gradient_by_p() {
        // d/dX (-|X - F|^p) = p sgn(F - X)|F - X|^(p-1), so the surrogate is 1/p of it.
        let p = 1.5;
        let (layer, x, w) = probe(p, 12);
        let gx = adder_grad_input(&layer, &x, &w).unwrap();
        let loss_x = |theta: &[f64]| {
            let xx = Tensor::from_vec(x.shape(), theta.to_vec()).unwrap();
            adder_forward(&layer, &xx).unwrap().dot(&w).unwrap()
        };
        for (i, &g) in gx.data().iter().enumerate() {
            let fd = central_difference(&loss_x, x.data(), i, 1e-6);
            let gp = p * g;
            assert!((fd - gp).abs() <= 1e-5 * fd.abs().max(gp.abs()).max(1e-8), "X[{i}] {fd} vs {gp}");
        }
    }
}
