use addernet::data::{shuffle_batches, ToyTask};
use addernet::layers::{GradientMode, Mode};
use addernet::net::{count_ops, Layer, LayerGrad, LayerKind, LayerSpec, LossHead, Network, NetworkSpec};
use addernet::optim::{adaptive_scale, OptimizerConfig, OptimizerState};
use addernet::{reduce_l2_norm, RngState, Tensor};
use proptest::prelude::*;

fn adder_grads(seed: u64, hidden: usize) -> (Network, addernet::net::Gradients) {
    let mut rng = RngState::new(seed);
    let mut net = Network::build(NetworkSpec::two_layer(LayerKind::Adder, hidden), &mut rng).unwrap();
    let ds = ToyTask::Ball.generate(16, &mut rng).unwrap();
    let (x, y) = ds.batch(&(0..16).collect::<Vec<_>>()).unwrap();
    let (logits, trace) = net.forward(&x, Mode::Train).unwrap();
    let (_, dl) = net.loss(&logits, &y).unwrap();
    let g = net.backward(&trace, &dl, GradientMode::FullPrecision).unwrap();
    (net, g)
}

fn filter_deltas(before: &Network, after: &Network) -> Vec<Vec<f64>> {
    before
        .layers()
        .iter()
        .zip(after.layers())
        .filter_map(|(a, b)| match (a, b) {
            (Layer::Adder(p), Layer::Adder(q)) => Some(
                p.filters.data().iter().zip(q.filters.data()).map(|(u, v)| v - u).collect(),
            ),
            _ => None,
        })
        .collect()
}

fn scaled(g: &addernet::net::Gradients, c: f64) -> addernet::net::Gradients {
    let mut g = g.clone();
    for l in &mut g.layers {
        if let LayerGrad::Filters(t) = l {
            t.scale(c);
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // first step from zero velocity without decay: Δθ = −lr(1 + m) α g, ‖α g‖ = η √k
    #[test]
    fn adaptive_step_has_fixed_norm(seed in 0u64..500, hidden in 1usize..8, eta in 0.01f64..1.0,
                                    lr in 0.001f64..0.5, m in 0.0f64..0.95) {
        let (net, g) = adder_grads(seed, hidden);
        let cfg = OptimizerConfig { momentum: m, weight_decay: 0.0, eta: Some(eta) };
        let mut after = net.clone();
        OptimizerState::new(&net, cfg).unwrap().nag_step(&mut after, &g, lr).unwrap();
        let sizes: Vec<usize> = g.layers.iter().filter_map(|l| match l {
            LayerGrad::Filters(t) => Some(t.len()),
            _ => None,
        }).collect();
        let norms: Vec<f64> = g.layers.iter().filter_map(|l| match l {
            LayerGrad::Filters(t) => Some(reduce_l2_norm(t)),
            _ => None,
        }).collect();
        for ((delta, k), gn) in filter_deltas(&net, &after).iter().zip(sizes).zip(norms) {
            let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let want = if gn < 1e-12 { 0.0 } else { lr * (1.0 + m) * eta * (k as f64).sqrt() };
            prop_assert!((norm - want).abs() <= 1e-9 * (1.0 + want), "{norm} vs {want}");
        }
    }

    #[test]
    fn adaptive_step_ignores_gradient_scale(seed in 0u64..500, c in 1e-3f64..1e3) {
        let (net, g) = adder_grads(seed, 4);
        let cfg = OptimizerConfig { momentum: 0.9, weight_decay: 5e-4, eta: Some(0.2) };
        let mut a = net.clone();
        let mut b = net.clone();
        OptimizerState::new(&net, cfg).unwrap().nag_step(&mut a, &g, 0.1).unwrap();
        OptimizerState::new(&net, cfg).unwrap().nag_step(&mut b, &scaled(&g, c), 0.1).unwrap();
        for (da, db) in filter_deltas(&net, &a).iter().zip(&filter_deltas(&net, &b)) {
            for (u, v) in da.iter().zip(db) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn adaptive_scale_normalizes(v in prop::collection::vec(-10.0f64..10.0, 1..40), eta in 0.01f64..2.0) {
        let t = Tensor::from_vec(&[v.len()], v.clone()).unwrap();
        let a = adaptive_scale(&t, eta);
        if reduce_l2_norm(&t) < 1e-12 {
            prop_assert_eq!(a, 0.0);
        } else {
            let scaled_norm = a * reduce_l2_norm(&t);
            prop_assert!((scaled_norm - eta * (v.len() as f64).sqrt()).abs() < 1e-9);
        }
    }

    // eval-mode outputs do not depend on which other samples share the batch
    #[test]
    fn eval_is_batch_invariant(seed in 0u64..500, split in 1usize..9) {
        let mut rng = RngState::new(seed);
        let net = Network::build(NetworkSpec::two_layer(LayerKind::Adder, 5), &mut rng).unwrap();
        let ds = ToyTask::MultiBall.generate(10, &mut rng).unwrap();
        let (x, _) = ds.batch(&(0..10).collect::<Vec<_>>()).unwrap();
        let whole = net.predict(&x).unwrap();
        let (head, _) = ds.batch(&(0..split).collect::<Vec<_>>()).unwrap();
        let (tail, _) = ds.batch(&(split..10).collect::<Vec<_>>()).unwrap();
        let parts: Vec<f64> = [net.predict(&head).unwrap(), net.predict(&tail).unwrap()]
            .iter().flat_map(|t| t.data().to_vec()).collect();
        for (a, b) in whole.data().iter().zip(&parts) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn toy_labels_follow_the_rules(seed in 0u64..1000, n in 1usize..200) {
        for task in [ToyTask::Ball, ToyTask::MultiBall, ToyTask::Linear] {
            let ds = task.generate(n, &mut RngState::new(seed)).unwrap();
            prop_assert_eq!(ds.len(), n);
            for i in 0..n {
                let p = ds.sample(i);
                let (x, y) = (p[0], p[1]);
                let want = match task {
                    ToyTask::Ball => {
                        let r = (x * x + y * y).sqrt();
                        prop_assert!(!(10.0..=15.0).contains(&r), "r = {}", r);
                        usize::from(r < 10.0)
                    }
                    ToyTask::MultiBall => usize::from(
                        (x - 10.0).powi(2) + (y - 10.0).powi(2) < 100.0
                            || (x + 10.0).powi(2) + (y + 10.0).powi(2) < 100.0,
                    ),
                    ToyTask::Linear => usize::from(x * y >= 0.0),
                };
                prop_assert_eq!(ds.labels[i], want);
            }
        }
    }

    #[test]
    fn batches_partition_indices(n in 0usize..300, bs in 1usize..64, seed in 0u64..100) {
        let b = shuffle_batches(n, bs, &mut RngState::new(seed)).unwrap();
        prop_assert!(b.iter().all(|v| !v.is_empty() && v.len() <= bs));
        let mut all = b.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    // op counts add over layers and depend only on the architecture
    #[test]
    fn op_counts_add_up(c1 in 1usize..8, c2 in 2usize..8, k in 1usize..4, side in 4usize..10) {
        let layers = |kind| vec![
            LayerSpec::feature(kind, c1, k, 1, 0),
            LayerSpec::Relu,
            LayerSpec::feature(kind, c2, side - k + 1, 1, 0),
        ];
        let spec = |kind| NetworkSpec { input: [side, side, 3], layers: layers(kind), loss: LossHead::SoftmaxCrossEntropy };
        let conv = count_ops(&spec(LayerKind::Conv)).unwrap();
        let adder = count_ops(&spec(LayerKind::Adder)).unwrap();
        let o = side - k + 1;
        let want = (k * k * 3 * c1 * o * o + o * o * c1 * c2) as u64;
        prop_assert_eq!(conv.multiplications, want);
        prop_assert_eq!(conv.additions, want);
        prop_assert_eq!(adder.multiplications, 0);
        prop_assert_eq!(adder.additions, 2 * want);
        prop_assert_eq!(conv.layers.iter().map(|l| l.multiplications).sum::<u64>(), conv.multiplications);
    }
}

#[test]
fn lenet_totals() {
    let conv = count_ops(&NetworkSpec::lenet5_bn(LayerKind::Conv, false)).unwrap();
    let adder = count_ops(&NetworkSpec::lenet5_bn(LayerKind::Adder, false)).unwrap();
    assert_eq!(conv.multiplications, 416_520);
    assert_eq!(adder.multiplications, 0);
    assert_eq!(adder.additions, 833_040);
    assert_eq!(NetworkSpec::lenet5_bn(LayerKind::Adder, false).param_counts().unwrap(), (61_470, 472));
}
