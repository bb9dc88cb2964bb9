//! Output variance of a single conv versus adder (ℓ1) layer at matched shapes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::{adder_forward, conv_forward, AdderLayerParams, ConvLayerParams};
use crate::tensor::{ConvGeometry, RngState, Tensor};

/// Fewest output elements accepted for a variance estimate.
pub const MIN_OUTPUTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceReport {
    pub d: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub var_x: f64,
    pub var_f: f64,
    pub outputs: usize,
    pub conv_var: f64,
    pub adder_var: f64,
    /// `d² c_in Var[X] Var[F]`
    pub conv_predicted: f64,
    /// `√(π/2) d² c_in (Var[X] + Var[F])`, a rough estimate; simulation does not match it
    pub adder_predicted_rough: f64,
    /// `(1 − 2/π) d² c_in (Var[X] + Var[F])`, exact for Gaussian `X`, `F`
    pub adder_predicted_gaussian: f64,
    /// `adder_var / conv_var`
    pub ratio: f64,
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Pushes `batch` Gaussian `d x d x c_in` patches through a conv and an ℓ1
/// adder layer sharing one Gaussian filter bank and pools the variance over
/// all `batch · c_out` outputs.
pub fn variance_report(
    d: usize,
    c_in: usize,
    c_out: usize,
    var_x: f64,
    var_f: f64,
    batch: usize,
    rng: &mut RngState,
) -> Result<VarianceReport> {
    if d == 0 || c_in == 0 || c_out == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    if !(var_x >= 0.0) || !(var_f >= 0.0) {
        return Err(Error::invalid("variances must be non-negative"));
    }
    let outputs = batch * c_out;
    if outputs < MIN_OUTPUTS {
        return Err(Error::invalid(format!(
            "{outputs} output elements is too few for a variance estimate (need {MIN_OUTPUTS})"
        )));
    }
    let geom = ConvGeometry::new(d, 1, 0)?;
    let filters = Tensor::randn(rng, &[d, d, c_in, c_out], 0.0, var_f.sqrt())?;
    let x = Tensor::randn(rng, &[batch, d, d, c_in], 0.0, var_x.sqrt())?;
    let conv = ConvLayerParams::new(filters.clone(), geom)?;
    let adder = AdderLayerParams::new(filters, geom, 1.0)?;
    let conv_var = variance(conv_forward(&conv, &x)?.data());
    let adder_var = variance(adder_forward(&adder, &x)?.data());
    let k = (d * d * c_in) as f64;
    let s = var_x + var_f;
    Ok(VarianceReport {
        d,
        c_in,
        c_out,
        var_x,
        var_f,
        outputs,
        conv_var,
        adder_var,
        conv_predicted: k * var_x * var_f,
        adder_predicted_rough: (std::f64::consts::PI / 2.0).sqrt() * k * s,
        adder_predicted_gaussian: (1.0 - 2.0 / std::f64::consts::PI) * k * s,
        ratio: adder_var / conv_var,
    })
}
