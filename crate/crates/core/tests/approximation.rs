use addernet::approx::{
    c0, emulate_masked_linear, relu_sum_check, realize_relu_sum, tent_r, tent_r_eps, Domain, RbfStyleSum, RbfTerm,
};
use addernet::RngState;
use proptest::prelude::*;

fn term(dim: usize) -> impl Strategy<Value = RbfTerm> {
    (-3.0f64..3.0, prop::collection::vec(-1.0f64..1.0, dim), -2.0f64..1.0).prop_map(|(a, w, b)| RbfTerm { a, w, b })
}

fn sum() -> impl Strategy<Value = RbfStyleSum> {
    (1usize..4).prop_flat_map(|d| prop::collection::vec(term(d), 0..6).prop_map(move |t| RbfStyleSum::new(d, t).unwrap()))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tent_shape(x in -3.0f64..3.0) {
        let r = tent_r(x);
        prop_assert!(r >= 0.0 && r <= 1.0);
        prop_assert_eq!(r, tent_r(-x));
        prop_assert!((r - (1.0 - x.abs()).max(0.0)).abs() < 1e-15);
    }

    #[test]
    fn scaled_tent_support(t in 0.0f64..2.0, eps in 0.05f64..1.0, d in 1usize..4) {
        let v = tent_r_eps(t, eps, d);
        if t >= eps {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!(v > 0.0 && v <= eps.powi(-(d as i32)) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn two_adder_layers_realize_relu_l1_sums(g in sum(), seed in 0u64..1000) {
        let dom = Domain::cube(g.dim, -1.0, 1.0).unwrap();
        let real = realize_relu_sum(&g, &dom).unwrap();
        let mut rng = RngState::new(seed);
        let mut pts: Vec<Vec<f64>> = (0..64).map(|_| dom.sample(&mut rng)).collect();
        pts.extend(dom.corners());
        for (x, y) in pts.iter().zip(real.eval_batch(&pts).unwrap()) {
            let want = g.eval(x).unwrap();
            prop_assert!((y[0] - want).abs() <= 1e-9 * (1.0 + want.abs()), "{} vs {}", y[0], want);
        }
    }

    #[test]
    fn masked_linear_is_exact(m in 1usize..4, d in 1usize..5, half in 0.5f64..5.0, seed in 0u64..1000) {
        let mut rng = RngState::new(seed);
        let mask: Vec<Vec<u8>> = (0..m).map(|_| (0..d).map(|_| rng.below(2) as u8).collect()).collect();
        let a: Vec<f64> = (0..m).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let dom = Domain::cube(d, -half, half).unwrap();
        let real = emulate_masked_linear(&mask, &a, &dom).unwrap();
        prop_assert_eq!(real.hidden_units(), 2 * m + 2);
        let mut pts: Vec<Vec<f64>> = (0..32).map(|_| dom.sample(&mut rng)).collect();
        pts.extend(dom.corners());
        for (x, y) in pts.iter().zip(real.eval_batch(&pts).unwrap()) {
            for i in 0..m {
                let want: f64 = a[i] * mask[i].iter().zip(x).map(|(&b, v)| b as f64 * v).sum::<f64>();
                prop_assert!((y[i] - want).abs() < 1e-9, "{} vs {}", y[i], want);
            }
        }
    }
}

#[test]
fn c0_closed_form() {
    for d in 1..=5 {
        let want = 2f64.powi(d as i32) / factorial(d + 1);
        assert!((c0(d).unwrap() - want).abs() < 1e-10, "d = {d}");
    }
}

#[test]
fn realization_on_many_instances() {
    let mut rng = RngState::new(11);
    assert!(relu_sum_check(20, 3, 5, 500, &mut rng).unwrap() < 1e-10);
}
