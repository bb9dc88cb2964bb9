//! Dense row-major tensors, seeded sampling and patch layout transforms.
//!
//! Image batches use NHWC order throughout: `[batch, height, width, channels]`.
//! Filter banks are stored as `[d, d, c_in, c_out]`, so a filter flattened in
//! `(i, j, k)` order lines up with one row produced by [`im2col`].

mod im2col;
mod rng;

pub use im2col::{col2im, col2im_accumulate, im2col, im2col_into, ConvGeometry};
pub use rng::RngState;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.iter().any(|&e| e == 0) {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "extents must be positive".into(),
        });
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != data.len() {
            return Err(Error::InvalidShape {
                shape: shape.to_vec(),
                reason: format!("expected {len} elements, got {}", data.len()),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a tensor without validation. Callers guarantee the invariant.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    /// Samples i.i.d. normal entries; the stream depends only on the RNG state.
    pub fn randn(rng: &mut RngState, shape: &[usize], mean: f64, stddev: f64) -> Result<Self> {
        if !(stddev >= 0.0) || !stddev.is_finite() || !mean.is_finite() {
            return Err(Error::invalid(format!(
                "normal parameters must be finite with stddev >= 0 (mean {mean}, stddev {stddev})"
            )));
        }
        let len = check_shape(shape)?;
        let data = (0..len).map(|_| mean + stddev * rng.standard_normal()).collect();
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                actual: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Interprets the shape as NHWC, padding lower ranks on the left with ones.
    pub fn nhwc(&self) -> Result<[usize; 4]> {
        match *self.shape.as_slice() {
            [n, h, w, c] => Ok([n, h, w, c]),
            [h, w, c] => Ok([1, h, w, c]),
            [n, c] => Ok([n, 1, 1, c]),
            _ => Err(Error::InvalidShape {
                shape: self.shape.clone(),
                reason: "expected a rank 2-4 tensor interpretable as NHWC".into(),
            }),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.expect_shape(other.shape())?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        self.expect_shape(other.shape())?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.expect_shape(other.shape())?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                actual: self.shape.clone(),
            });
        }
        Ok(())
    }
}

/// Euclidean norm over every element.
pub fn reduce_l2_norm(t: &Tensor) -> f64 {
    // Scaled accumulation keeps tiny and huge gradients from under/overflowing.
    let scale = t.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ss: f64 = t.data.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * ss.sqrt()
}

/// Standard-normal tensor with the given mean and standard deviation.
pub fn randn_seeded(rng: &mut RngState, shape: &[usize], mean: f64, stddev: f64) -> Result<Tensor> {
    Tensor::randn(rng, shape, mean, stddev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_extent_rejected() {
        assert!(Tensor::zeros(&[2, 0]).is_err());
        assert!(Tensor::zeros(&[]).is_err());
        let mut rng = RngState::new(1);
        assert!(randn_seeded(&mut rng, &[3, 0, 1], 0.0, 1.0).is_err());
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 4]).is_ok());
    }

    #[test]
    fn degenerate_normal_is_constant() {
        let mut rng = RngState::new(7);
        let t = randn_seeded(&mut rng, &[4, 5], 3.25, 0.0).unwrap();
        assert!(t.data().iter().all(|&x| x == 3.25));
    }

    #[test]
    fn negative_stddev_rejected() {
        let mut rng = RngState::new(7);
        assert!(randn_seeded(&mut rng, &[2], 0.0, -1.0).is_err());
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let a = randn_seeded(&mut RngState::new(42), &[16, 3], 0.5, 2.0).unwrap();
        let b = randn_seeded(&mut RngState::new(42), &[16, 3], 0.5, 2.0).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn million_samples_match_stddev() {
        let t = randn_seeded(&mut RngState::new(3), &[1_000_000], 0.0, 10.0).unwrap();
        let n = t.len() as f64;
        let mean = t.sum() / n;
        let var = t.data().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        assert!((9.9..=10.1).contains(&sd), "sample stddev {sd}");
        assert!(mean.abs() < 0.05, "sample mean {mean}");
    }

    #[test]
    fn l2_norm_hand_values() {
        assert_eq!(reduce_l2_norm(&Tensor::zeros(&[3]).unwrap()), 0.0);
        let t = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert!((reduce_l2_norm(&t) - 5.0).abs() < 1e-15);
        let t = Tensor::from_vec(&[4], vec![1.0; 4]).unwrap();
        assert!((reduce_l2_norm(&t) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn l2_norm_survives_extreme_magnitudes() {
        let t = Tensor::from_vec(&[2], vec![3e200, 4e200]).unwrap();
        assert!((reduce_l2_norm(&t) / 5e200 - 1.0).abs() < 1e-14);
        let t = Tensor::from_vec(&[2], vec![3e-200, 4e-200]).unwrap();
        assert!((reduce_l2_norm(&t) / 5e-200 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nhwc_interpretation() {
        assert_eq!(Tensor::zeros(&[2, 3]).unwrap().nhwc().unwrap(), [2, 1, 1, 3]);
        assert_eq!(Tensor::zeros(&[4, 5, 6]).unwrap().nhwc().unwrap(), [1, 4, 5, 6]);
        assert!(Tensor::zeros(&[4]).unwrap().nhwc().is_err());
    }
}
