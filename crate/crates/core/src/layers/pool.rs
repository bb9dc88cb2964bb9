//! Non-overlapping max pooling (window = stride).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    /// flat input index of each output's maximum
    argmax: Vec<usize>,
}

pub fn maxpool_forward(input: &Tensor, size: usize) -> Result<(Tensor, PoolCache)> {
    let [n, h, w, c] = input.nhwc()?;
    if size == 0 || size > h || size > w {
        return Err(Error::WindowTooLarge {
            kernel: size,
            height: h,
            width: w,
        });
    }
    let (oh, ow) = (h / size, w / size);
    let x = input.data();
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    for s in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = usize::MAX;
                    let mut best_v = f64::NEG_INFINITY;
                    for i in 0..size {
                        for j in 0..size {
                            let idx = ((s * h + oy * size + i) * w + ox * size + j) * c + ch;
                            // first maximum wins ties
                            if best == usize::MAX || x[idx] > best_v {
                                best = idx;
                                best_v = x[idx];
                            }
                        }
                    }
                    out.push(best_v);
                    argmax.push(best);
                }
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![n, oh, ow, c], out),
        PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool_backward(cache: &PoolCache, upstream: &Tensor) -> Result<Tensor> {
    if upstream.len() != cache.argmax.len() {
        return Err(Error::StaleTrace);
    }
    let mut dx = Tensor::zeros(&cache.input_shape)?;
    let d = dx.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(upstream.data()) {
        d[idx] += g;
    }
    Ok(dx)
}
