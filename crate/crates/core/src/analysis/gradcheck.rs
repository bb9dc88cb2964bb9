//! Central-difference gradient oracle.

use serde::Serialize;

use crate::error::{Error, Result};

/// `(L(θ + h e_i) - L(θ - h e_i)) / 2h`.
pub fn central_difference(loss: &dyn Fn(&[f64]) -> f64, params: &[f64], index: usize, step: f64) -> f64 {
    let mut theta = params.to_vec();
    theta[index] = params[index] + step;
    let up = loss(&theta);
    theta[index] = params[index] - step;
    let down = loss(&theta);
    (up - down) / (2.0 * step)
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// coordinate with the largest relative error
    pub worst_index: Option<usize>,
    /// coordinates skipped because the loss has a kink within `step`
    pub excluded: Vec<usize>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Compares `grad` against central differences at `indices`.
///
/// A coordinate is treated as sitting on a kink, and excluded, when the two
/// one-sided difference quotients disagree by more than `kink_ratio` relative
/// to their size; a smooth loss makes them agree to `O(h)`.
pub fn finite_diff_check(
    loss: &dyn Fn(&[f64]) -> f64,
    params: &[f64],
    grad: &[f64],
    indices: &[usize],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    if grad.len() != params.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![params.len()],
            actual: vec![grad.len()],
        });
    }
    let base = loss(params);
    if !base.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let mut theta = params.to_vec();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst_index: None,
        excluded: Vec::new(),
        tolerance,
    };
    for &i in indices {
        if i >= params.len() {
            return Err(Error::invalid(format!("coordinate {i} out of range")));
        }
        theta[i] = params[i] + step;
        let up = loss(&theta);
        theta[i] = params[i] - step;
        let down = loss(&theta);
        theta[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss at coordinate {i}")));
        }
        let fwd = (up - base) / step;
        let bwd = (base - down) / step;
        let scale = fwd.abs().max(bwd.abs()).max(1e-8);
        if (fwd - bwd).abs() > kink_threshold(step, scale) {
            report.excluded.push(i);
            continue;
        }
        let fd = (up - down) / (2.0 * step);
        let rel = relative_error(fd, grad[i]);
        report.checked += 1;
        if report.worst_index.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = Some(i);
        }
    }
    Ok(report)
}

fn kink_threshold(step: f64, scale: f64) -> f64 {
    // one-sided quotients of a smooth function differ by about h |L''|;
    // allow a generous curvature budget before calling it a kink
    1e-2 * scale + 1e3 * step
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivative() {
        let f = |t: &[f64]| t[0] * t[0];
        assert!((central_difference(&f, &[3.0], 0, 1e-6) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn report_on_smooth_loss() {
        let f = |t: &[f64]| t.iter().map(|x| x.sin()).sum::<f64>();
        let p = [0.1f64, 0.7, -1.3];
        let g: Vec<f64> = p.iter().map(|x| x.cos()).collect();
        let r = finite_diff_check(&f, &p, &g, &[0, 1, 2], 1e-6, 1e-6).unwrap();
        assert!(r.passed());
        assert_eq!(r.checked, 3);
        assert!(r.excluded.is_empty());
    }

    #[test]
    fn kink_coordinate_excluded() {
        // |x - 1| at x = 1
        let f = |t: &[f64]| (t[0] - 1.0).abs() + t[1] * t[1];
        let r = finite_diff_check(&f, &[1.0, 2.0], &[0.0, 4.0], &[0, 1], 1e-6, 1e-6).unwrap();
        assert_eq!(r.excluded, vec![0]);
        assert_eq!(r.checked, 1);
        assert!(r.passed());
    }

    #[test]
    fn non_finite_loss_is_error() {
        let f = |t: &[f64]| 1.0 / t[0];
        assert!(finite_diff_check(&f, &[0.0], &[0.0], &[0], 1e-6, 1e-6).is_err());
    }
}
