use addernet::layers::{
    adder_forward, adder_grad_filters, conv_forward, l2_adder_conv_identity, AdderLayerParams, ConvLayerParams,
    GradientMode,
};
use addernet::tensor::{col2im, im2col};
use addernet::{ConvGeometry, RngState, Tensor};
use proptest::prelude::*;

#[derive(Debug, Clone, Copy)]
struct Case {
    n: usize,
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    seed: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (1usize..3, 1usize..4, 1usize..3, 0usize..2, 0u64..1000)
        .prop_flat_map(|(kernel, stride, c_in, padding, seed)| {
            let min = kernel.saturating_sub(2 * padding).max(1);
            (min..min + 5, min..min + 5, 1usize..3, 1usize..4).prop_map(move |(h, w, n, c_out)| Case {
                n,
                h,
                w,
                c_in,
                c_out,
                kernel,
                stride,
                padding,
                seed,
            })
        })
}

fn setup(c: Case, scale: f64) -> (Tensor, Tensor, ConvGeometry) {
    let mut rng = RngState::new(c.seed);
    let x = Tensor::randn(&mut rng, &[c.n, c.h, c.w, c.c_in], 0.0, scale).unwrap();
    let f = Tensor::randn(&mut rng, &[c.kernel, c.kernel, c.c_in, c.c_out], 0.0, scale).unwrap();
    (x, f, ConvGeometry::new(c.kernel, c.stride, c.padding).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // <im2col(x), y> = <x, col2im(y)>
    #[test]
    fn im2col_adjoint(c in case()) {
        let (x, _, g) = setup(c, 1.0);
        let one = Tensor::from_vec(&[1, c.h, c.w, c.c_in], x.data()[..c.h * c.w * c.c_in].to_vec()).unwrap();
        let cols = im2col(&one, g).unwrap();
        let mut rng = RngState::new(c.seed + 1);
        let y = Tensor::randn(&mut rng, cols.shape(), 0.0, 1.0).unwrap();
        let lhs = cols.dot(&y).unwrap();
        let back = col2im(&y, [c.h, c.w, c.c_in], g).unwrap();
        let rhs: f64 = back.data().iter().zip(one.data()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn adder_output_is_nonpositive(c in case(), p in 1.0f64..=2.0) {
        let (x, f, g) = setup(c, 2.0);
        let params = AdderLayerParams::new(f, g, p).unwrap();
        let y = adder_forward(&params, &x).unwrap();
        prop_assert!(y.data().iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn sign_gradient_is_ternary(x in -3.0f64..3.0, f in -3.0f64..3.0, k in 1usize..4) {
        // one window, one filter, unit upstream: the gradient is sgn(X − F)
        let input = Tensor::full(&[1, 1, 1, k], x).unwrap();
        let filt = Tensor::full(&[1, 1, k, 1], f).unwrap();
        let params = AdderLayerParams::new(filt, ConvGeometry::new(1, 1, 0).unwrap(), 1.0).unwrap();
        let up = Tensor::full(&[1, 1, 1, 1], 1.0).unwrap();
        let g = adder_grad_filters(&params, &input, &up, GradientMode::SignGrad).unwrap();
        let want = if x > f { 1.0 } else if x < f { -1.0 } else { 0.0 };
        prop_assert!(g.data().iter().all(|&v| v == want));
    }

    #[test]
    fn sign_gradient_values_on_random_layers(c in case()) {
        let (x, f, g) = setup(c, 1.0);
        let params = AdderLayerParams::new(f, g, 1.0).unwrap();
        let y = adder_forward(&params, &x).unwrap();
        let positions = y.len() / c.c_out;
        let mut up = Tensor::zeros(y.shape()).unwrap();
        up.data_mut()[0] = 1.0;
        let grad = adder_grad_filters(&params, &x, &up, GradientMode::SignGrad).unwrap();
        prop_assert!(positions >= 1);
        prop_assert!(grad.data().iter().all(|&v| v == -1.0 || v == 0.0 || v == 1.0));
    }

    // −‖X − F‖² = 2 X·F − ‖X‖² − ‖F‖²
    #[test]
    fn squared_adder_matches_conv_identity(c in case()) {
        let (x, f, g) = setup(c, 1.0);
        let ya = adder_forward(&AdderLayerParams::new(f.clone(), g, 2.0).unwrap(), &x).unwrap();
        let yc = conv_forward(&ConvLayerParams::new(f.clone(), g).unwrap(), &x).unwrap();
        prop_assert!(l2_adder_conv_identity(&ya, &yc, &x, &f, g).unwrap() < 1e-9);
    }

    #[test]
    fn adder_forward_matches_naive_loop(c in case()) {
        let (x, f, g) = setup(c, 1.0);
        let y = adder_forward(&AdderLayerParams::new(f.clone(), g, 1.0).unwrap(), &x).unwrap();
        let (oh, ow) = g.output_hw(c.h, c.w).unwrap();
        let at = |n: usize, i: isize, j: isize, ch: usize| -> f64 {
            if i < 0 || j < 0 || i >= c.h as isize || j >= c.w as isize {
                0.0
            } else {
                x.data()[((n * c.h + i as usize) * c.w + j as usize) * c.c_in + ch]
            }
        };
        for n in 0..c.n {
            for oi in 0..oh {
                for oj in 0..ow {
                    for t in 0..c.c_out {
                        let mut s = 0.0;
                        for di in 0..c.kernel {
                            for dj in 0..c.kernel {
                                for ch in 0..c.c_in {
                                    let xi = (oi * c.stride + di) as isize - c.padding as isize;
                                    let xj = (oj * c.stride + dj) as isize - c.padding as isize;
                                    let fv = f.data()[((di * c.kernel + dj) * c.c_in + ch) * c.c_out + t];
                                    s += (at(n, xi, xj, ch) - fv).abs();
                                }
                            }
                        }
                        let got = y.data()[((n * oh + oi) * ow + oj) * c.c_out + t];
                        prop_assert!((got + s).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
