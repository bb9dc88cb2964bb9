//! Gradient descent on `min_f |‖x − f‖₁ − y|` in the `y < 0` regime, where the
//! objective reduces to `‖x − f‖₁ − y` and coordinates decouple.
//!
//! Sign descent steps by exactly `α` per coordinate and therefore reaches
//! `x_i` only when `(x_i − f_i⁰)/α` is an integer; otherwise it ends in a
//! 2-cycle straddling `x_i`. Full-precision descent contracts by `1 − α`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::GradientMode;

/// Gap below which an iterate counts as optimal.
pub const CONVERGENCE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Oscillating,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Oscillating => "oscillating",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    /// `f⁰, f¹, …`
    pub iterates: Vec<Vec<f64>>,
    /// `|‖x − fʲ‖₁ − y|` per iterate
    pub objective: Vec<f64>,
    /// `‖x − fʲ‖₁`, the distance of the objective from its optimum `−y`
    pub gap: Vec<f64>,
    pub verdict: Verdict,
    /// `max_i |f_iᵀ − f_iᵀ⁻¹|` over the last step; 0 once converged
    pub amplitude: f64,
}

impl ConvergenceTrace {
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("trace holds f⁰")
    }
}

fn l1_gap(x: &[f64], f: &[f64]) -> f64 {
    x.iter().zip(f).map(|(a, b)| (a - b).abs()).sum()
}

fn check(x: &[f64], f0: &[f64], alpha: f64) -> Result<()> {
    if x.len() != f0.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![x.len()],
            actual: vec![f0.len()],
        });
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("step size {alpha} must be positive")));
    }
    if x.iter().chain(f0).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("descent inputs".into()));
    }
    Ok(())
}

fn run(x: &[f64], f0: &[f64], y: f64, max_iters: usize, step: impl Fn(f64, f64) -> f64) -> ConvergenceTrace {
    let mut iterates = vec![f0.to_vec()];
    let mut gap = vec![l1_gap(x, f0)];
    while gap.last().copied().unwrap_or(0.0) >= CONVERGENCE_TOL && iterates.len() <= max_iters {
        let cur = iterates.last().expect("non-empty");
        let next: Vec<f64> = cur.iter().zip(x).map(|(&f, &xi)| step(f, xi)).collect();
        gap.push(l1_gap(x, &next));
        let cycled = iterates.len() >= 2 && iterates[iterates.len() - 2] == next;
        iterates.push(next);
        if cycled {
            break;
        }
    }
    let converged = *gap.last().expect("non-empty") < CONVERGENCE_TOL;
    let amplitude = if converged || iterates.len() < 2 {
        0.0
    } else {
        let a = &iterates[iterates.len() - 1];
        let b = &iterates[iterates.len() - 2];
        a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    };
    ConvergenceTrace {
        objective: gap.iter().map(|g| (g - y).abs()).collect(),
        iterates,
        gap,
        verdict: if converged {
            Verdict::Converged
        } else {
            Verdict::Oscillating
        },
        amplitude,
    }
}

/// `f ← f − α·sgn(f − x)`, stopping at convergence, at a detected 2-cycle,
/// or after `max_iters` steps.
pub fn simulate_sign_descent(x: &[f64], f0: &[f64], y: f64, alpha: f64, max_iters: usize) -> Result<ConvergenceTrace> {
    check(x, f0, alpha)?;
    Ok(run(x, f0, y, max_iters, |f, xi| {
        f - alpha * crate::layers::kernels::sgn(f - xi)
    }))
}

/// `f ← f − α·(f − x)`.
pub fn simulate_full_descent(x: &[f64], f0: &[f64], y: f64, alpha: f64, max_iters: usize) -> Result<ConvergenceTrace> {
    check(x, f0, alpha)?;
    Ok(run(x, f0, y, max_iters, |f, xi| f - alpha * (f - xi)))
}

pub fn simulate(
    mode: GradientMode,
    x: &[f64],
    f0: &[f64],
    y: f64,
    alpha: f64,
    max_iters: usize,
) -> Result<ConvergenceTrace> {
    match mode {
        GradientMode::SignGrad => simulate_sign_descent(x, f0, y, alpha, max_iters),
        GradientMode::FullPrecision => simulate_full_descent(x, f0, y, alpha, max_iters),
    }
}

/// Closed-form full-descent iterate `x − (x − f⁰)(1 − α)ʲ`.
pub fn full_descent_iterate(x: f64, f0: f64, alpha: f64, j: usize) -> f64 {
    x - (x - f0) * (1.0 - alpha).powi(j as i32)
}

/// Whether every `(x_i − f_i⁰)/α` is an integer: the exact condition under
/// which sign descent reaches the optimum. Reliable when the inputs are
/// dyadic rationals, for which the subtraction is exact and an integral
/// quotient is representable.
pub fn sign_descent_reaches_optimum(x: &[f64], f0: &[f64], alpha: f64) -> bool {
    x.iter().zip(f0).all(|(a, b)| {
        let q = (a - b) / alpha;
        q.is_finite() && q.fract() == 0.0
    })
}

/// One scalar problem of a descent sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropCase {
    pub x: f64,
    pub f0: f64,
    pub alpha: f64,
}

/// `count` scalar problems with dyadic `x, f0 ∈ [−1, 1]` (multiples of 1/16)
/// and `α ∈ (0, 1)` (multiples of 1/32). Roughly a third have an integral
/// `(x − f0)/α`.
pub fn dyadic_grid(count: usize) -> Vec<PropCase> {
    (0..count)
        .map(|i| PropCase {
            x: ((i * 7) % 33) as f64 / 16.0 - 1.0,
            f0: ((i * 13) % 17) as f64 / 16.0 - 0.5,
            alpha: (1 + (i * 5 + i / 12) % 31) as f64 / 32.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_converges_when_ratio_integral() {
        let t = simulate_sign_descent(&[0.5], &[0.0], -1.0, 0.25, 100).unwrap();
        assert_eq!(t.verdict, Verdict::Converged);
        assert_eq!(t.steps(), 2);
        assert_eq!(t.last(), &[0.5]);
        assert_eq!(t.amplitude, 0.0);
        assert_eq!(*t.objective.last().unwrap(), 1.0);
    }

    #[test]
    fn sign_oscillates_otherwise() {
        let t = simulate_sign_descent(&[0.5], &[0.0], -1.0, 0.2, 1000).unwrap();
        assert_eq!(t.verdict, Verdict::Oscillating);
        let n = t.iterates.len();
        let (a, b) = (t.iterates[n - 2][0], t.iterates[n - 1][0]);
        let (lo, hi) = (a.min(b), a.max(b));
        assert!((lo - 0.4).abs() < 1e-12 && (hi - 0.6).abs() < 1e-12, "{lo} {hi}");
        assert!((t.amplitude - 0.2).abs() < 1e-12);
    }

    #[test]
    fn already_optimal() {
        for mode in [GradientMode::SignGrad, GradientMode::FullPrecision] {
            let t = simulate(mode, &[0.3, -2.0], &[0.3, -2.0], -1.0, 0.7, 10).unwrap();
            assert_eq!(t.verdict, Verdict::Converged);
            assert_eq!(t.steps(), 0);
        }
    }

    #[test]
    fn full_descent_hand_values() {
        let t = simulate_full_descent(&[1.0], &[0.0], -1.0, 0.5, 3).unwrap();
        assert_eq!(t.iterates[3][0], 0.875);
        let one = simulate_full_descent(&[1.0, -4.0], &[0.0, 3.0], -1.0, 1.0, 10).unwrap();
        assert_eq!(one.verdict, Verdict::Converged);
        assert_eq!(one.steps(), 1);
    }

    #[test]
    fn vector_needs_every_coordinate_integral() {
        // second coordinate has (x − f0)/α = 2.5
        let t = simulate_sign_descent(&[0.5, 0.625], &[0.0, 0.0], -1.0, 0.25, 1000).unwrap();
        assert_eq!(t.verdict, Verdict::Oscillating);
        assert!(!sign_descent_reaches_optimum(&[0.5, 0.625], &[0.0, 0.0], 0.25));
        assert!(sign_descent_reaches_optimum(&[0.5, 0.75], &[0.0, 0.0], 0.25));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(simulate_sign_descent(&[0.0], &[0.0], -1.0, 0.0, 1).is_err());
        assert!(simulate_full_descent(&[0.0, 1.0], &[0.0], -1.0, 0.5, 1).is_err());
    }

    #[test]
    fn grid_mixes_both_outcomes() {
        let grid = dyadic_grid(200);
        let hits = grid
            .iter()
            .filter(|c| sign_descent_reaches_optimum(&[c.x], &[c.f0], c.alpha))
            .count();
        assert!(hits > 20 && hits < 180, "{hits}");
        assert!(grid.iter().all(|c| c.alpha > 0.0 && c.alpha < 1.0));
    }
}
