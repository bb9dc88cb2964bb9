use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Square-window geometry shared by convolution-like layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::invalid(format!(
                "kernel and stride must be positive (kernel {kernel}, stride {stride})"
            )));
        }
        Ok(ConvGeometry {
            kernel,
            stride,
            padding,
        })
    }

    /// Output spatial extent for an `h x w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::invalid("kernel and stride must be positive"));
        }
        if self.kernel > ph || self.kernel > pw {
            return Err(Error::WindowTooLarge {
                kernel: self.kernel,
                height: ph,
                width: pw,
            });
        }
        Ok((
            (ph - self.kernel) / self.stride + 1,
            (pw - self.kernel) / self.stride + 1,
        ))
    }

    /// Number of values in one receptive field for `channels` input channels.
    pub fn patch_len(&self, channels: usize) -> usize {
        self.kernel * self.kernel * channels
    }
}

/// Writes the patch matrix of one `h x w x c` image into `out`
/// (`oh * ow` rows of `d * d * c` values). Padded entries are zero.
pub fn im2col_into(src: &[f64], h: usize, w: usize, c: usize, geom: ConvGeometry, out: &mut [f64]) {
    let (oh, ow) = geom
        .output_hw(h, w)
        .expect("im2col_into called with invalid geometry");
    let d = geom.kernel;
    let row_len = d * d * c;
    debug_assert_eq!(src.len(), h * w * c);
    debug_assert_eq!(out.len(), oh * ow * row_len);
    let pad = geom.padding as isize;
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut out[(oy * ow + ox) * row_len..][..row_len];
            let y0 = (oy * geom.stride) as isize - pad;
            let x0 = (ox * geom.stride) as isize - pad;
            for i in 0..d {
                let y = y0 + i as isize;
                let dst = &mut row[i * d * c..][..d * c];
                if y < 0 || y >= h as isize {
                    dst.fill(0.0);
                    continue;
                }
                for j in 0..d {
                    let x = x0 + j as isize;
                    let cell = &mut dst[j * c..][..c];
                    if x < 0 || x >= w as isize {
                        cell.fill(0.0);
                    } else {
                        let base = (y as usize * w + x as usize) * c;
                        cell.copy_from_slice(&src[base..base + c]);
                    }
                }
            }
        }
    }
}

/// Adds the patch matrix `cols` back onto an `h x w x c` image buffer.
/// This is the adjoint of [`im2col_into`]; padded positions are dropped.
pub fn col2im_accumulate(cols: &[f64], h: usize, w: usize, c: usize, geom: ConvGeometry, dst: &mut [f64]) {
    let (oh, ow) = geom
        .output_hw(h, w)
        .expect("col2im_accumulate called with invalid geometry");
    let d = geom.kernel;
    let row_len = d * d * c;
    debug_assert_eq!(dst.len(), h * w * c);
    debug_assert_eq!(cols.len(), oh * ow * row_len);
    let pad = geom.padding as isize;
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &cols[(oy * ow + ox) * row_len..][..row_len];
            let y0 = (oy * geom.stride) as isize - pad;
            let x0 = (ox * geom.stride) as isize - pad;
            for i in 0..d {
                let y = y0 + i as isize;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for j in 0..d {
                    let x = x0 + j as isize;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let base = (y as usize * w + x as usize) * c;
                    let src = &row[(i * d + j) * c..][..c];
                    for (o, &v) in dst[base..base + c].iter_mut().zip(src) {
                        *o += v;
                    }
                }
            }
        }
    }
}

/// Patch matrix of a single `H x W x C` image: one row per output position.
pub fn im2col(input: &Tensor, geom: ConvGeometry) -> Result<Tensor> {
    let [h, w, c] = image_dims(input)?;
    let (oh, ow) = geom.output_hw(h, w)?;
    let row_len = geom.patch_len(c);
    let mut out = vec![0.0; oh * ow * row_len];
    im2col_into(input.data(), h, w, c, geom, &mut out);
    Ok(Tensor::from_parts(vec![oh * ow, row_len], out))
}

/// Folds a patch matrix back into an image of shape `[h, w, c]`, summing overlaps.
pub fn col2im(cols: &Tensor, image_shape: [usize; 3], geom: ConvGeometry) -> Result<Tensor> {
    let [h, w, c] = image_shape;
    let (oh, ow) = geom.output_hw(h, w)?;
    cols.expect_shape(&[oh * ow, geom.patch_len(c)])?;
    let mut out = Tensor::zeros(&[h, w, c])?;
    col2im_accumulate(cols.data(), h, w, c, geom, out.data_mut());
    Ok(out)
}

fn image_dims(input: &Tensor) -> Result<[usize; 3]> {
    match *input.shape() {
        [h, w, c] => Ok([h, w, c]),
        [1, h, w, c] => Ok([h, w, c]),
        _ => Err(Error::InvalidShape {
            shape: input.shape().to_vec(),
            reason: "expected a single H x W x C image".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngState;

    fn ramp(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn one_by_one_is_identity() {
        let x = ramp(&[3, 4, 2]);
        let cols = im2col(&x, ConvGeometry::new(1, 1, 0).unwrap()).unwrap();
        assert_eq!(cols.shape(), &[12, 2]);
        assert_eq!(cols.data(), x.data());
    }

    #[test]
    fn three_by_three_two_by_two_windows() {
        // 0 1 2 / 3 4 5 / 6 7 8
        let x = ramp(&[3, 3, 1]);
        let cols = im2col(&x, ConvGeometry::new(2, 1, 0).unwrap()).unwrap();
        assert_eq!(cols.shape(), &[4, 4]);
        let expected = [
            0.0, 1.0, 3.0, 4.0, //
            1.0, 2.0, 4.0, 5.0, //
            3.0, 4.0, 6.0, 7.0, //
            4.0, 5.0, 7.0, 8.0,
        ];
        assert_eq!(cols.data(), &expected);
    }

    #[test]
    fn padding_is_zero_filled() {
        let x = Tensor::full(&[2, 2, 1], 1.0).unwrap();
        let cols = im2col(&x, ConvGeometry::new(3, 1, 1).unwrap()).unwrap();
        assert_eq!(cols.shape(), &[4, 9]);
        // top-left window sees 4 real pixels and 5 padded zeros
        assert_eq!(cols.data()[..9].iter().sum::<f64>(), 4.0);
        assert_eq!(cols.data()[0], 0.0);
    }

    #[test]
    fn kernel_larger_than_input_rejected() {
        let x = ramp(&[2, 2, 1]);
        assert!(matches!(
            im2col(&x, ConvGeometry::new(3, 1, 0).unwrap()),
            Err(Error::WindowTooLarge { .. })
        ));
        assert!(ConvGeometry::new(0, 1, 0).is_err());
        assert!(ConvGeometry::new(1, 0, 0).is_err());
    }

    #[test]
    fn adjoint_identity_random_shapes() {
        let mut rng = RngState::new(11);
        for _ in 0..100 {
            let d = 1 + rng.below(3);
            let s = 1 + rng.below(2);
            let p = rng.below(2);
            let h = d + rng.below(5);
            let w = d + rng.below(5);
            let c = 1 + rng.below(3);
            let geom = ConvGeometry::new(d, s, p).unwrap();
            let x = Tensor::randn(&mut rng, &[h, w, c], 0.0, 1.0).unwrap();
            let cols = im2col(&x, geom).unwrap();
            let m = Tensor::randn(&mut rng, cols.shape(), 0.0, 1.0).unwrap();
            let lhs = m.dot(&cols).unwrap();
            let rhs = col2im(&m, [h, w, c], geom).unwrap().dot(&x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }
}
