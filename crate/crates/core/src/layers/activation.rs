use crate::error::Result;
use crate::tensor::Tensor;

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|x| x.max(0.0))
}

/// Passes `upstream` where `input > 0`; the subgradient at 0 is 0.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    input.zip_map(upstream, |x, g| if x > 0.0 { g } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::gradcheck::central_difference;
    use crate::tensor::RngState;

    #[test]
    fn forward_values() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn dead_unit_blocks_gradient() {
        let x = Tensor::from_vec(&[2], vec![-1.0, 0.0]).unwrap();
        let g = Tensor::from_vec(&[2], vec![123.0, 5.0]).unwrap();
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn finite_difference_away_from_zero() {
        let mut rng = RngState::new(0);
        let x = Tensor::randn(&mut rng, &[50], 0.0, 1.0).unwrap();
        let w = Tensor::randn(&mut rng, &[50], 0.0, 1.0).unwrap();
        let g = relu_backward(&x, &w).unwrap();
        let loss = |t: &[f64]| relu(&Tensor::from_vec(&[50], t.to_vec()).unwrap()).dot(&w).unwrap();
        for i in 0..50 {
            if x.data()[i].abs() < 1e-3 {
                continue;
            }
            let fd = central_difference(&loss, x.data(), i, 1e-6);
            assert!((fd - g.data()[i]).abs() < 1e-6);
        }
    }
}
