//! Random-centre tent-kernel approximator
//! `φ_N(x) = (1/N) Σ a_i r_ε(‖x − Z_i‖₁)` with `r_ε(t) = r(t/ε)/ε^d`.
//!
//! Centres are drawn from `q ∝ |f|` and `a_i = sgn f(Z_i) · ‖f‖₁ / c0`, so
//! `E φ_N = ψ_ε = c0⁻¹ ∫ f(z) r_ε(‖x − z‖₁) dz`, where `c0 = ∫ r(‖x‖₁) dx`.

use serde::Serialize;

use super::rbf::{Domain, RbfStyleSum, RbfTerm};
use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Below this, a target's ℓ1 norm counts as zero.
pub const MIN_L1_NORM: f64 = 1e-12;

/// `r(x) = ReLU(x + 1) + ReLU(x − 1) − 2 ReLU(x) = max(0, 1 − |x|)`, evaluated
/// in the closed form so it is exactly zero off `(−1, 1)`.
pub fn tent_r(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

/// `r(t/ε) / ε^d`.
pub fn tent_r_eps(t: f64, eps: f64, dim: usize) -> f64 {
    tent_r(t / eps) / eps.powi(dim as i32)
}

/// `c0 = ∫_{ℝ^d} r(‖x‖₁) dx`, integrated radially: the ℓ1 sphere of radius
/// `s` has surface measure `2^d s^(d−1) / (d−1)!`. Composite Simpson rule.
pub fn c0(dim: usize) -> Result<f64> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let shell = |s: f64| {
        let fact: f64 = (1..dim).map(|k| k as f64).product();
        2f64.powi(dim as i32) * s.powi(dim as i32 - 1) / fact
    };
    let g = |s: f64| tent_r(s) * shell(s);
    const PANELS: usize = 2000;
    let h = 1.0 / PANELS as f64;
    let mut acc = g(0.0) + g(1.0);
    for i in 1..PANELS {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    Ok(acc * h / 3.0)
}

/// Midpoint-rule quadrature over `domain` with `per_axis` cells per axis.
pub fn integrate(f: &mut dyn FnMut(&[f64]) -> f64, domain: &Domain, per_axis: usize) -> f64 {
    let d = domain.dim();
    let per_axis = per_axis.max(1);
    let widths: Vec<f64> = domain.lo.iter().zip(&domain.hi).map(|(a, b)| (b - a) / per_axis as f64).collect();
    let cell: f64 = widths.iter().product();
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for mut k in 0..per_axis.pow(d as u32) {
        for j in 0..d {
            x[j] = domain.lo[j] + (k % per_axis) as f64 * widths[j] + widths[j] / 2.0;
            k /= per_axis;
        }
        acc += f(&x);
    }
    acc * cell
}

/// Norms of the target that the construction needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimates {
    /// `‖f‖₁` over the sampling box
    pub l1: f64,
    /// an upper bound on `|f|` over the sampling box
    pub sup: f64,
}

impl NormEstimates {
    /// `‖f‖₁` by midpoint quadrature; `sup` from the same grid, inflated by 10%
    /// unless a bound is supplied.
    pub fn estimate(f: &dyn Fn(&[f64]) -> f64, domain: &Domain, per_axis: usize, sup: Option<f64>) -> Self {
        let mut peak = 0.0f64;
        let l1 = integrate(
            &mut |x| {
                let v = f(x).abs();
                peak = peak.max(v);
                v
            },
            domain,
            per_axis,
        );
        NormEstimates {
            l1,
            sup: sup.unwrap_or(1.1 * peak),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TentApproximator {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    /// `sgn f(Z_i)`
    pub signs: Vec<f64>,
    /// `‖f‖₁ / c0`, so that `a_i = signs_i · scale`
    pub scale: f64,
    pub epsilon: f64,
    pub c0: f64,
}

impl TentApproximator {
    pub fn n(&self) -> usize {
        self.centers.len()
    }

    pub fn coefficient(&self, i: usize) -> f64 {
        self.signs[i] * self.scale
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let sum: f64 = self
            .centers
            .iter()
            .zip(&self.signs)
            .map(|(z, s)| {
                let t: f64 = z.iter().zip(x).map(|(a, b)| (a - b).abs()).sum();
                s * tent_r_eps(t, self.epsilon, self.dim)
            })
            .sum();
        self.scale * sum / self.n() as f64
    }

    /// The same function as a sum of ReLU'd ℓ1 distances (three terms per
    /// centre): for `t ≥ 0`, `ε r(t/ε) = ReLU(t + ε) + ReLU(t − ε) − 2 ReLU(t)`.
    pub fn to_rbf_sum(&self) -> RbfStyleSum {
        let k = 1.0 / (self.n() as f64 * self.epsilon.powi(self.dim as i32 + 1));
        let mut terms = Vec::with_capacity(3 * self.n());
        for (i, z) in self.centers.iter().enumerate() {
            let c = self.coefficient(i) * k;
            for (a, b) in [(c, self.epsilon), (c, -self.epsilon), (-2.0 * c, 0.0)] {
                terms.push(RbfTerm { a, w: z.clone(), b });
            }
        }
        RbfStyleSum { dim: self.dim, terms }
    }
}

/// One draw from `q ∝ |f|` on `domain` by rejection from the uniform box proposal.
pub fn sample_q(f: &dyn Fn(&[f64]) -> f64, domain: &Domain, sup: f64, rng: &mut RngState) -> Result<(Vec<f64>, f64)> {
    const MAX_TRIES: usize = 10_000_000;
    for _ in 0..MAX_TRIES {
        let z = domain.sample(rng);
        let v = f(&z);
        if rng.uniform(0.0, sup) < v.abs() {
            return Ok((z, v));
        }
    }
    Err(Error::invalid("rejection sampler found no mass: target is ~0 on the sampling box"))
}

/// Draws `n` centres from `q ∝ |f|` on `domain` and assembles `φ_N`.
pub fn build_phi_n(
    f: &dyn Fn(&[f64]) -> f64,
    domain: &Domain,
    n: usize,
    epsilon: f64,
    rng: &mut RngState,
    norms: NormEstimates,
) -> Result<TentApproximator> {
    if n == 0 {
        return Err(Error::invalid("need at least one centre"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("bandwidth {epsilon} must be positive")));
    }
    if !(norms.l1 >= MIN_L1_NORM) || !(norms.sup > 0.0) {
        return Err(Error::invalid("target is ~0 on the sampling box"));
    }
    let dim = domain.dim();
    let c0 = c0(dim)?;
    let mut centers = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    for _ in 0..n {
        let (z, v) = sample_q(f, domain, norms.sup, rng)?;
        centers.push(z);
        signs.push(if v > 0.0 { 1.0 } else { -1.0 });
    }
    Ok(TentApproximator {
        dim,
        centers,
        signs,
        scale: norms.l1 / c0,
        epsilon,
        c0,
    })
}

/// `ψ_ε(x) = c0⁻¹ ∫ f(x − εu) r(‖u‖₁) du`, midpoint rule on `[−1, 1]^d`.
pub fn psi_eps(f: &dyn Fn(&[f64]) -> f64, x: &[f64], epsilon: f64, per_axis: usize) -> Result<f64> {
    let dim = x.len();
    let unit = Domain::cube(dim, -1.0, 1.0)?;
    let mut shifted = vec![0.0; dim];
    let integral = integrate(
        &mut |u| {
            let w = tent_r(u.iter().map(|v| v.abs()).sum());
            if w == 0.0 {
                return 0.0;
            }
            for j in 0..dim {
                shifted[j] = x[j] - epsilon * u[j];
            }
            f(&shifted) * w
        },
        &unit,
        per_axis,
    );
    Ok(integral / c0(dim)?)
}
