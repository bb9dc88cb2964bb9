//! Inner loops shared by the adder and convolution layers.
//!
//! Reductions keep four independent accumulators so the compiler can keep
//! them in vector lanes; the summation order is fixed, so results are
//! reproducible bit for bit.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ac, ar) = a.split_at(a.len() & !3);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(4).zip(bc.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ar.iter().zip(br) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ac, ar) = a.split_at(a.len() & !3);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(4).zip(bc.chunks_exact(4)) {
        acc[0] += (x[0] - y[0]).abs();
        acc[1] += (x[1] - y[1]).abs();
        acc[2] += (x[2] - y[2]).abs();
        acc[3] += (x[3] - y[3]).abs();
    }
    let mut tail = 0.0;
    for (x, y) in ar.iter().zip(br) {
        tail += (x - y).abs();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ac, ar) = a.split_at(a.len() & !3);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(4).zip(bc.chunks_exact(4)) {
        let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2], x[3] - y[3]];
        acc[0] += d[0] * d[0];
        acc[1] += d[1] * d[1];
        acc[2] += d[2] * d[2];
        acc[3] += d[3] * d[3];
    }
    let mut tail = 0.0;
    for (x, y) in ar.iter().zip(br) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `sum |a - b|^p` for fractional `p`.
#[inline]
pub(crate) fn lp_dist(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d == 0.0 {
                0.0
            } else {
                d.powf(p)
            }
        })
        .sum()
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub(crate) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Signed magnitude power `sgn(z) |z|^e`, with zero mapped to zero.
#[inline]
pub(crate) fn signed_pow(z: f64, e: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        sgn(z) * z.abs().powf(e)
    }
}

/// Transposes a row-major `rows x cols` matrix.
pub(crate) fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(src.len(), rows * cols);
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}
