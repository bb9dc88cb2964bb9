//! Per-layer filter-gradient norms of an adder network and its conv twin at
//! initialization, on one shared batch.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::{GradientMode, Mode};
use crate::net::{Layer, LayerGrad, LayerSpec, Network};
use crate::tensor::{reduce_l2_norm, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradNormRow {
    /// 1-based index among feature layers
    pub layer: usize,
    pub adder: f64,
    pub conv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradNormTable {
    pub rows: Vec<GradNormRow>,
}

impl GradNormTable {
    /// Every adder-layer norm is strictly below its conv counterpart.
    pub fn ordering_holds(&self) -> bool {
        self.rows.iter().all(|r| r.adder < r.conv)
    }
}

fn same_architecture(a: &LayerSpec, b: &LayerSpec) -> bool {
    use LayerSpec::*;
    match (a, b) {
        (Adder { .. } | Conv { .. }, Adder { .. } | Conv { .. }) => a.geometry() == b.geometry(),
        _ => a == b,
    }
}

fn filter_norms(net: &mut Network, x: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
    let (logits, trace) = net.forward(x, Mode::Train)?;
    let (_, dl) = net.loss(&logits, labels)?;
    let grads = net.backward(&trace, &dl, GradientMode::FullPrecision)?;
    Ok(net
        .layers()
        .iter()
        .zip(&grads.layers)
        .filter_map(|(l, g)| match (l, g) {
            (Layer::Adder(_) | Layer::Conv(_), LayerGrad::Filters(t)) => Some(reduce_l2_norm(t)),
            _ => None,
        })
        .collect())
}

/// One training-mode forward/backward of each network on `(x, labels)`.
/// The networks must have identical layer sequences apart from the
/// adder/conv choice. Neither network's parameters change (BN running
/// statistics do).
pub fn grad_norm_table(adder: &mut Network, conv: &mut Network, x: &Tensor, labels: &[usize]) -> Result<GradNormTable> {
    let (sa, sc) = (adder.spec(), conv.spec());
    let matched = sa.input == sc.input
        && sa.loss == sc.loss
        && sa.layers.len() == sc.layers.len()
        && sa.layers.iter().zip(&sc.layers).all(|(a, b)| same_architecture(a, b));
    if !matched {
        return Err(Error::invalid("grad-norm table needs two networks of the same architecture"));
    }
    let na = filter_norms(adder, x, labels)?;
    let nc = filter_norms(conv, x, labels)?;
    Ok(GradNormTable {
        rows: na
            .into_iter()
            .zip(nc)
            .enumerate()
            .map(|(i, (a, c))| GradNormRow {
                layer: i + 1,
                adder: a,
                conv: c,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{LayerKind, NetworkSpec};
    use crate::tensor::RngState;

    #[test]
    fn zero_batch_is_finite() {
        let mut rng = RngState::new(0);
        let mut a = Network::build(NetworkSpec::lenet5_bn(LayerKind::Adder, false), &mut rng).unwrap();
        let mut c = Network::build(NetworkSpec::lenet5_bn(LayerKind::Conv, false), &mut rng).unwrap();
        let x = Tensor::zeros(&[4, 32, 32, 1]).unwrap();
        let t = grad_norm_table(&mut a, &mut c, &x, &[0, 1, 2, 3]).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert!(t.rows.iter().all(|r| r.adder.is_finite() && r.conv.is_finite()));
    }

    #[test]
    fn architecture_mismatch() {
        let mut rng = RngState::new(0);
        let mut a = Network::build(NetworkSpec::two_layer(LayerKind::Adder, 2), &mut rng).unwrap();
        let mut c = Network::build(NetworkSpec::two_layer(LayerKind::Conv, 3), &mut rng).unwrap();
        let x = Tensor::zeros(&[4, 1, 1, 2]).unwrap();
        assert!(grad_norm_table(&mut a, &mut c, &x, &[0, 1, 0, 1]).is_err());
    }
}
