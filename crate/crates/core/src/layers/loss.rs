//! Loss heads. Both return the batch-mean loss and its gradient with respect
//! to the logits.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Softmax cross-entropy over logits `[n, k]` (any shape whose last axis is `k`).
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let k = *logits.shape().last().expect("rank >= 1");
    let n = logits.len() / k;
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            actual: vec![labels.len()],
        });
    }
    if !logits.all_finite() {
        return Err(Error::NonFinite("logits".into()));
    }
    let mut grad = vec![0.0; logits.len()];
    let mut total = 0.0;
    for ((row, g), &y) in logits.data().chunks_exact(k).zip(grad.chunks_exact_mut(k)).zip(labels) {
        if y >= k {
            return Err(Error::LabelOutOfRange { label: y, classes: k });
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (gi, &v) in g.iter_mut().zip(row) {
            *gi = (v - m).exp();
            z += *gi;
        }
        total += z.ln() + m - row[y];
        for gi in g.iter_mut() {
            *gi /= z * n as f64;
        }
        g[y] -= 1.0 / n as f64;
    }
    Ok((total / n as f64, Tensor::from_parts(logits.shape().to_vec(), grad)))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Class 1 iff `sigmoid(z) > 0.5`.
pub fn predict_binary(z: f64) -> usize {
    usize::from(sigmoid(z) > 0.5)
}

/// Binary cross-entropy on one logit per sample, in the stable form
/// `max(z, 0) - z y + ln(1 + e^{-|z|})`.
pub fn sigmoid_bce(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let n = logits.len();
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            actual: vec![labels.len()],
        });
    }
    if !logits.all_finite() {
        return Err(Error::NonFinite("logits".into()));
    }
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    for ((g, &z), &y) in grad.iter_mut().zip(logits.data()).zip(labels) {
        if y > 1 {
            return Err(Error::NonBinaryLabel(y));
        }
        let yf = y as f64;
        total += z.max(0.0) - z * yf + (-z.abs()).exp().ln_1p();
        *g = (sigmoid(z) - yf) / n as f64;
    }
    Ok((total / n as f64, Tensor::from_parts(logits.shape().to_vec(), grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::gradcheck::central_difference;
    use crate::tensor::RngState;

    #[test]
    fn uniform_logits_give_ln_k() {
        let x = Tensor::zeros(&[3, 10]).unwrap();
        let (l, _) = softmax_cross_entropy(&x, &[0, 4, 9]).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn confident_logit_vanishing_loss() {
        let mut v = vec![0.0; 10];
        v[3] = 50.0;
        let (l, _) = softmax_cross_entropy(&Tensor::from_vec(&[1, 10], v).unwrap(), &[3]).unwrap();
        assert!(l < 1e-20);
        let (l, _) = sigmoid_bce(&Tensor::from_vec(&[1], vec![50.0]).unwrap(), &[1]).unwrap();
        assert!(l < 1e-20 && l >= 0.0);
    }

    #[test]
    fn bce_symmetry_point() {
        let (l, g) = sigmoid_bce(&Tensor::from_vec(&[1], vec![0.0]).unwrap(), &[1]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g.data(), &[-0.5]);
    }

    #[test]
    fn label_errors() {
        assert!(matches!(
            softmax_cross_entropy(&Tensor::zeros(&[1, 3]).unwrap(), &[3]),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
        assert!(matches!(
            sigmoid_bce(&Tensor::zeros(&[1]).unwrap(), &[2]),
            Err(Error::NonBinaryLabel(2))
        ));
    }

    #[test]
    fn finite_difference_match() {
        let mut rng = RngState::new(0);
        for _ in 0..20 {
            let x = Tensor::randn(&mut rng, &[4, 5], 0.0, 3.0).unwrap();
            let labels: Vec<usize> = (0..4).map(|_| rng.below(5)).collect();
            let (_, g) = softmax_cross_entropy(&x, &labels).unwrap();
            let f = |t: &[f64]| softmax_cross_entropy(&Tensor::from_vec(&[4, 5], t.to_vec()).unwrap(), &labels).unwrap().0;
            for i in 0..20 {
                let fd = central_difference(&f, x.data(), i, 1e-6);
                assert!((fd - g.data()[i]).abs() < 1e-6);
            }
            let z = Tensor::randn(&mut rng, &[6], 0.0, 3.0).unwrap();
            let bin: Vec<usize> = (0..6).map(|_| rng.below(2)).collect();
            let (_, g) = sigmoid_bce(&z, &bin).unwrap();
            let f = |t: &[f64]| sigmoid_bce(&Tensor::from_vec(&[6], t.to_vec()).unwrap(), &bin).unwrap().0;
            for i in 0..6 {
                let fd = central_difference(&f, z.data(), i, 1e-6);
                assert!((fd - g.data()[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(predict_binary(0.0), 0);
        assert_eq!(predict_binary(1e-9), 1);
        assert_eq!(predict_binary(-3.0), 0);
    }
}
