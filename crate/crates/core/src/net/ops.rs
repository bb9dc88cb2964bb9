//! Arithmetic cost of one forward pass per sample.
//!
//! A multiplication-based layer with `d x d x c_in` windows, `c_out` filters
//! and `H' x W'` outputs costs `d² c_in c_out H' W'` multiplications and the
//! same number of additions. An adder layer replaces each multiply with a
//! subtraction and an absolute-value accumulate, counted as two additions.
//! Batch norm, activations and pooling are not counted.

use serde::Serialize;

use super::spec::{LayerSpec, NetworkSpec};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerOps {
    pub index: usize,
    pub kind: &'static str,
    pub multiplications: u64,
    pub additions: u64,
    pub xnors: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpCountReport {
    pub layers: Vec<LayerOps>,
    pub multiplications: u64,
    pub additions: u64,
    pub xnors: u64,
}

pub fn count_ops(spec: &NetworkSpec) -> Result<OpCountReport> {
    let shapes = spec.shapes()?;
    let mut prev = spec.input;
    let mut layers = Vec::new();
    for (index, (layer, shape)) in spec.layers.iter().zip(&shapes).enumerate() {
        if let Some((c_out, g)) = layer.geometry() {
            let macs = (g.kernel * g.kernel * prev[2] * c_out * shape[0] * shape[1]) as u64;
            let (multiplications, additions) = match layer {
                LayerSpec::Adder { .. } => (0, 2 * macs),
                _ => (macs, macs),
            };
            layers.push(LayerOps {
                index,
                kind: layer.name(),
                multiplications,
                additions,
                xnors: 0,
            });
        }
        prev = *shape;
    }
    Ok(OpCountReport {
        multiplications: layers.iter().map(|l| l.multiplications).sum(),
        additions: layers.iter().map(|l| l.additions).sum(),
        xnors: 0,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{LayerKind, LossHead};

    #[test]
    fn unit_conv() {
        let spec = NetworkSpec {
            input: [1, 1, 1],
            layers: vec![LayerSpec::dense(LayerKind::Conv, 1)],
            loss: LossHead::SigmoidBce,
        };
        let r = count_ops(&spec).unwrap();
        assert_eq!((r.multiplications, r.additions), (1, 1));
    }

    #[test]
    fn lenet_counts() {
        let conv = count_ops(&NetworkSpec::lenet5_bn(LayerKind::Conv, false)).unwrap();
        let per_layer: Vec<u64> = conv.layers.iter().map(|l| l.multiplications).collect();
        assert_eq!(per_layer, vec![117_600, 240_000, 48_000, 10_080, 840]);
        assert_eq!(conv.multiplications, 416_520);
        assert_eq!(conv.additions, conv.multiplications);
        let adder = count_ops(&NetworkSpec::lenet5_bn(LayerKind::Adder, false)).unwrap();
        assert_eq!(adder.multiplications, 0);
        assert_eq!(adder.additions, 2 * conv.multiplications);
        let mixed = count_ops(&NetworkSpec::lenet5_bn(LayerKind::Adder, true)).unwrap();
        assert_eq!(mixed.multiplications, 117_600);
    }
}
