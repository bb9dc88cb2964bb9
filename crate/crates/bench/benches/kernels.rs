use addernet::layers::{
    adder_forward, adder_grad_filters, adder_grad_input, conv_forward, conv_grad, AdderLayerParams, ConvLayerParams,
    GradientMode,
};
use addernet::net::{LayerKind, Network, NetworkSpec};
use addernet::{ConvGeometry, RngState, Tensor};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

// second LeNet-5 feature layer: 5x5, 6 -> 16 channels on 14x14 maps
fn layer_inputs(batch: usize) -> (Tensor, Tensor, ConvGeometry) {
    let mut rng = RngState::new(0);
    let x = Tensor::randn(&mut rng, &[batch, 14, 14, 6], 0.0, 1.0).unwrap();
    let f = Tensor::randn(&mut rng, &[5, 5, 6, 16], 0.0, 0.1).unwrap();
    (x, f, ConvGeometry::new(5, 1, 0).unwrap())
}

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    for batch in [1, 32] {
        let (x, f, geom) = layer_inputs(batch);
        let conv = ConvLayerParams::new(f.clone(), geom).unwrap();
        g.bench_with_input(BenchmarkId::new("conv", batch), &x, |b, x| {
            b.iter(|| conv_forward(black_box(&conv), black_box(x)).unwrap())
        });
        for p in [1.0, 1.5, 2.0] {
            let adder = AdderLayerParams::new(f.clone(), geom, p).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("adder_p{p}"), batch), &x, |b, x| {
                b.iter(|| adder_forward(black_box(&adder), black_box(x)).unwrap())
            });
        }
    }
    g.finish();
}

fn backward(c: &mut Criterion) {
    let mut g = c.benchmark_group("backward");
    let (x, f, geom) = layer_inputs(32);
    let up = Tensor::randn(&mut RngState::new(1), &[32, 10, 10, 16], 0.0, 1.0).unwrap();
    let conv = ConvLayerParams::new(f.clone(), geom).unwrap();
    g.bench_function("conv", |b| b.iter(|| conv_grad(&conv, black_box(&x), black_box(&up)).unwrap()));
    let adder = AdderLayerParams::new(f, geom, 1.0).unwrap();
    for (name, mode) in [("adder_filters_full", GradientMode::FullPrecision), ("adder_filters_sign", GradientMode::SignGrad)] {
        g.bench_function(name, |b| {
            b.iter(|| adder_grad_filters(&adder, black_box(&x), black_box(&up), mode).unwrap())
        });
    }
    g.bench_function("adder_input", |b| b.iter(|| adder_grad_input(&adder, black_box(&x), black_box(&up)).unwrap()));
    g.finish();
}

fn lenet(c: &mut Criterion) {
    let mut g = c.benchmark_group("lenet5bn_predict");
    g.sample_size(10);
    let x = Tensor::randn(&mut RngState::new(2), &[64, 28, 28, 1], 0.0, 1.0).unwrap();
    for kind in [LayerKind::Conv, LayerKind::Adder] {
        let net = Network::build(NetworkSpec::lenet5_bn(kind, false), &mut RngState::new(3)).unwrap();
        g.bench_function(format!("{kind:?}").to_lowercase(), |b| b.iter(|| net.predict(black_box(&x)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, forward, backward, lenet);
criterion_main!(benches);
