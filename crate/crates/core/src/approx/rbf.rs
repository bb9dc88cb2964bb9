//! Sums of ReLU'd ℓ1 distances and their exact realization by two adder
//! layers, plus the two-layer adder emulation of masked linear maps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::{adder_forward, AdderLayerParams};
use crate::tensor::{ConvGeometry, Tensor};

/// One term `a · ReLU(‖w − x‖₁ + b)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RbfTerm {
    pub a: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

/// `g(x) = Σ a_i ReLU(‖W_i − x‖₁ + b_i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RbfStyleSum {
    pub dim: usize,
    pub terms: Vec<RbfTerm>,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

fn check_dim(want: usize, x: &[f64]) -> Result<()> {
    if x.len() != want {
        return Err(Error::ShapeMismatch {
            expected: vec![want],
            actual: vec![x.len()],
        });
    }
    Ok(())
}

impl RbfStyleSum {
    pub fn new(dim: usize, terms: Vec<RbfTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        for t in &terms {
            check_dim(dim, &t.w)?;
        }
        Ok(RbfStyleSum { dim, terms })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(self
            .terms
            .iter()
            .map(|t| t.a * (l1(&t.w, x) + t.b).max(0.0))
            .sum())
    }
}

/// Axis-aligned box `[lo_j, hi_j]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("domain bounds need matching, non-empty lo and hi"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("degenerate domain: every axis needs lo < hi"));
        }
        Ok(Domain { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// `max_j |x_j|` over the box.
    pub fn max_abs_coord(&self) -> f64 {
        self.lo.iter().chain(&self.hi).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |Σ_j ±x_j|` over the box and all sign patterns.
    pub fn max_abs_signed_sum(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a.abs().max(b.abs())).sum()
    }

    /// The `2^dim` corners.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|j| if mask >> j & 1 == 1 { self.hi[j] } else { self.lo[j] })
                    .collect()
            })
            .collect()
    }

    /// Uniform grid with `per_axis` points per axis, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|mut k| {
                (0..d)
                    .map(|j| {
                        let i = k % per_axis;
                        k /= per_axis;
                        self.lo[j] + (self.hi[j] - self.lo[j]) * i as f64 / (per_axis - 1) as f64
                    })
                    .collect()
            })
            .collect()
    }

    /// Uniform sample.
    pub fn sample(&self, rng: &mut crate::tensor::RngState) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| rng.uniform(a, b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }
}

/// A fully connected adder layer with folded batch normalization:
/// `L(x)_i = a_i ‖W_i − x‖₁ + b_i`, evaluated with the ℓ1 adder kernel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdderDense {
    /// `[1, 1, d_in, d_out]`
    pub layer: AdderLayerParams,
    pub scale: Vec<f64>,
    pub bias: Vec<f64>,
}

impl AdderDense {
    /// `weights[i]` is `W_i`, the template of output `i`.
    pub fn new(weights: &[Vec<f64>], scale: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let d_out = weights.len();
        let d_in = weights.first().map_or(0, Vec::len);
        if d_out == 0 || d_in == 0 || scale.len() != d_out || bias.len() != d_out {
            return Err(Error::invalid("adder dense layer needs matching, non-empty weights, scales and biases"));
        }
        let mut filters = vec![0.0; d_in * d_out];
        for (i, w) in weights.iter().enumerate() {
            check_dim(d_in, w)?;
            for (j, &v) in w.iter().enumerate() {
                filters[j * d_out + i] = v;
            }
        }
        let f = Tensor::from_vec(&[1, 1, d_in, d_out], filters)?;
        Ok(AdderDense {
            layer: AdderLayerParams::new(f, ConvGeometry::new(1, 1, 0)?, 1.0)?,
            scale,
            bias,
        })
    }

    pub fn d_in(&self) -> usize {
        self.layer.in_channels()
    }

    pub fn d_out(&self) -> usize {
        self.layer.out_channels()
    }

    /// Rows of `x` are inputs; returns one row of outputs per input.
    pub fn forward(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let d = self.d_in();
        let mut flat = Vec::with_capacity(x.len() * d);
        for row in x {
            check_dim(d, row)?;
            flat.extend_from_slice(row);
        }
        let y = adder_forward(&self.layer, &Tensor::from_vec(&[x.len(), 1, 1, d], flat)?)?;
        Ok(y
            .data()
            .chunks_exact(self.d_out())
            .map(|neg_dist| {
                neg_dist
                    .iter()
                    .zip(self.scale.iter().zip(&self.bias))
                    .map(|(&nd, (&a, &b))| -a * nd + b)
                    .collect()
            })
            .collect())
    }
}

fn relu_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect()
}

/// `L²(ReLU(L¹(x)))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoLayerAdderRealization {
    pub layer1: AdderDense,
    pub layer2: AdderDense,
    /// bound on the first-layer outputs over the domain
    pub m: f64,
}

impl TwoLayerAdderRealization {
    pub fn eval_batch(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.layer2.forward(&relu_rows(self.layer1.forward(x)?))
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_batch(&[x.to_vec()])?.remove(0))
    }

    pub fn hidden_units(&self) -> usize {
        self.layer1.d_out()
    }
}

/// Two adder layers computing `g` on `domain`.
///
/// Layer 1: `|a_i| ‖W_i − x‖₁ + |a_i| b_i`, so after ReLU unit `i` carries
/// `|a_i| ReLU(‖W_i − x‖₁ + b_i) ∈ [0, M)`. Layer 2 has one output with unit
/// scale and template `−M` where `a_i > 0`, `+M` otherwise; then
/// `|h_i + M| = h_i + M` and `|h_i − M| = M − h_i`, and the bias `−tM`
/// cancels the offsets.
pub fn realize_relu_sum(g: &RbfStyleSum, domain: &Domain) -> Result<TwoLayerAdderRealization> {
    check_dim(g.dim, &domain.lo)?;
    let mut terms = g.terms.clone();
    if terms.is_empty() {
        terms.push(RbfTerm {
            a: 0.0,
            w: vec![0.0; g.dim],
            b: 0.0,
        });
    }
    let t = terms.len();
    let weights: Vec<Vec<f64>> = terms.iter().map(|tm| tm.w.clone()).collect();
    let scale: Vec<f64> = terms.iter().map(|tm| tm.a.abs()).collect();
    let bias: Vec<f64> = terms.iter().map(|tm| tm.a.abs() * tm.b).collect();
    let layer1 = AdderDense::new(&weights, scale, bias)?;

    // ‖W − x‖₁ is convex, so its maximum over the box sits at a corner.
    let mut probes = domain.corners();
    probes.extend(domain.grid(if domain.dim() <= 3 { 9 } else { 2 }));
    let peak = layer1
        .forward(&probes)?
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let m = if peak > 0.0 { 2.0 * peak } else { 1.0 };

    let templates: Vec<f64> = terms.iter().map(|tm| if tm.a > 0.0 { -m } else { m }).collect();
    let layer2 = AdderDense::new(&[templates], vec![1.0], vec![-(t as f64) * m])?;
    Ok(TwoLayerAdderRealization { layer1, layer2, m })
}

/// Two adder layers computing `x ↦ (A_i Σ_j B_ij x_j)_i` on `domain`, with
/// `2m + 2` hidden units.
///
/// With every `|W_ij| > max |x_j|`, `|W_ij − x_j| = |W_ij| − sgn(W_ij) x_j`,
/// so an adder unit is an affine map with ±1 weights. Hidden unit `i` takes
/// signs `s_ij = 2B_ij − 1`, unit `m + i` takes `−s_ij`, and the last two
/// take all `+1` and all `−1`; a bias `C − ‖W‖₁` with `C > max |Σ ±x_j|`
/// keeps every unit positive, so the ReLU is inert. Output `i` adds unit
/// `i`, subtracts unit `m + i`, adds unit `2m`, subtracts unit `2m + 1`, and
/// adds the other pairs, each of which sums to the constant `2C`:
/// `(h_i − h_{m+i}) + (h_{2m} − h_{2m+1}) = 4 Σ_j B_ij x_j`.
pub fn emulate_masked_linear(mask: &[Vec<u8>], scales: &[f64], domain: &Domain) -> Result<TwoLayerAdderRealization> {
    let m = mask.len();
    if m == 0 || scales.len() != m {
        return Err(Error::invalid("mask needs at least one row and one scale per row"));
    }
    let d = domain.dim();
    for row in mask {
        check_dim(d, &row.iter().map(|&v| v as f64).collect::<Vec<_>>())?;
        if row.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask entries must be 0 or 1"));
        }
    }
    let w1 = 2.0 * domain.max_abs_coord();
    let c1 = 2.0 * domain.max_abs_signed_sum();
    let mut hidden = Vec::with_capacity(2 * m + 2);
    for row in mask {
        hidden.push(unit_with(&row.iter().map(|&b| 2.0 * b as f64 - 1.0).collect::<Vec<_>>(), w1));
    }
    for row in mask {
        hidden.push(unit_with(&row.iter().map(|&b| 1.0 - 2.0 * b as f64).collect::<Vec<_>>(), w1));
    }
    hidden.push(unit_with(&vec![1.0; d], w1));
    hidden.push(unit_with(&vec![-1.0; d], w1));
    let norm1 = d as f64 * w1;
    let n_hidden = hidden.len();
    let layer1 = AdderDense::new(&hidden, vec![1.0; n_hidden], vec![c1 - norm1; n_hidden])?;

    // hidden values lie in (0, 2C)
    let w2 = 4.0 * c1;
    let mut out_w = Vec::with_capacity(m);
    let mut out_a = Vec::with_capacity(m);
    let mut out_b = Vec::with_capacity(m);
    for (i, &big_a) in scales.iter().enumerate() {
        let signs: Vec<f64> = (0..n_hidden)
            .map(|k| if k == m + i || k == 2 * m + 1 { -1.0 } else { 1.0 })
            .collect();
        out_w.push(unit_with(&signs, w2));
        let a = big_a / 4.0;
        out_a.push(a);
        out_b.push(-a * (n_hidden as f64 * w2 + 2.0 * (m as f64 - 1.0) * c1));
    }
    let layer2 = AdderDense::new(&out_w, out_a, out_b)?;
    Ok(TwoLayerAdderRealization { layer1, layer2, m: c1 })
}

/// Template with `sgn(−W_j) = signs_j` and `|W_j| = w`.
fn unit_with(signs: &[f64], w: f64) -> Vec<f64> {
    signs.iter().map(|s| -s * w).collect()
}
