//! Datasets: toy 2-D classification tasks and IDX image files.

pub mod idx;
pub mod toy;

pub use idx::{load_mnist_dir, load_mnist_idx, Normalization};
pub use toy::{gen_linear, gen_multi_ball, gen_unit_ball, ToyTask};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::tensor::{RngState, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    /// `[n, h, w, c]`
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, inputs: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let [n, _, _, _] = inputs.nhwc()?;
        if n == 0 || n != labels.len() {
            return Err(Error::invalid(format!(
                "dataset needs matching non-zero counts ({n} inputs, {} labels)",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        if !inputs.all_finite() {
            return Err(Error::NonFinite("dataset inputs".into()));
        }
        let inputs = if inputs.shape().len() == 4 {
            inputs
        } else {
            let shape = inputs.nhwc()?;
            inputs.reshape(&shape)?
        };
        Ok(LabeledDataset {
            name: name.into(),
            inputs,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[h, w, c]` of one sample.
    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.inputs.shape();
        [s[1], s[2], s[3]]
    }

    fn sample_len(&self) -> usize {
        self.sample_shape().iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let k = self.sample_len();
        &self.inputs.data()[i * k..(i + 1) * k]
    }

    /// Gathers the samples at `indices` into one batch.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let [h, w, c] = self.sample_shape();
        let mut data = Vec::with_capacity(indices.len() * h * w * c);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("sample index {i} out of range")));
            }
            data.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        Ok((Tensor::from_vec(&[indices.len(), h, w, c], data)?, labels))
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> Result<LabeledDataset> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        let (inputs, labels) = self.batch(&idx)?;
        LabeledDataset::new(self.name.clone(), inputs, labels, self.classes)
    }
}

/// A random permutation of `0..n` cut into batches of `batch_size`; the last
/// batch may be short.
pub fn shuffle_batches(n: usize, batch_size: usize, rng: &mut RngState) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_each_index_once() {
        let mut rng = RngState::new(0);
        let b = shuffle_batches(10, 3, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3, 1]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn single_batch_and_determinism() {
        let a = shuffle_batches(7, 7, &mut RngState::new(3)).unwrap();
        let b = shuffle_batches(7, 7, &mut RngState::new(3)).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
        assert!(shuffle_batches(7, 0, &mut RngState::new(3)).is_err());
    }

    #[test]
    fn dataset_contract() {
        let x = Tensor::zeros(&[2, 1, 1, 2]).unwrap();
        assert!(LabeledDataset::new("t", x.clone(), vec![0], 2).is_err());
        assert!(matches!(
            LabeledDataset::new("t", x.clone(), vec![0, 2], 2),
            Err(Error::LabelOutOfRange { .. })
        ));
        let ds = LabeledDataset::new("t", x, vec![0, 1], 2).unwrap();
        let (b, l) = ds.batch(&[1, 1, 0]).unwrap();
        assert_eq!(b.shape(), &[3, 1, 1, 2]);
        assert_eq!(l, vec![1, 1, 0]);
    }
}
