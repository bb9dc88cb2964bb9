use super::adder::patch_sq_norms;
use crate::error::{Error, Result};
use crate::tensor::{ConvGeometry, Tensor};

/// Largest `|Y_l2 - 2 Y_conv + ‖patch‖² + ‖F_t‖²|` over all output elements,
/// given the outputs of a `p = 2` adder layer and a conv layer sharing
/// `input`, `filters` and `geometry`. Zero up to rounding.
pub fn l2_adder_conv_identity(
    adder_out: &Tensor,
    conv_out: &Tensor,
    input: &Tensor,
    filters: &Tensor,
    geometry: ConvGeometry,
) -> Result<f64> {
    super::check_filter_bank(filters, geometry)?;
    let plan = super::Plan::new(filters, geometry, input)?;
    adder_out.expect_shape(&plan.output_shape())?;
    conv_out.expect_shape(&plan.output_shape())?;
    let cout = plan.c_out;
    let k = plan.patch_len;
    let mut filter_sq = vec![0.0; cout];
    for (i, &f) in filters.data().iter().enumerate() {
        filter_sq[i % cout] += f * f;
    }
    debug_assert_eq!(filters.len(), k * cout);
    let patches = patch_sq_norms(input, geometry)?;
    let mut worst: f64 = 0.0;
    for ((a_row, c_row), &xsq) in adder_out
        .data()
        .chunks_exact(cout)
        .zip(conv_out.data().chunks_exact(cout))
        .zip(&patches)
    {
        for t in 0..cout {
            let r = a_row[t] - 2.0 * c_row[t] + xsq + filter_sq[t];
            if !r.is_finite() {
                return Err(Error::NonFinite("identity residual".into()));
            }
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}
