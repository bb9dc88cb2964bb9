//! Named target functions for the approximation experiments.

use super::rbf::Domain;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// `max(0, 1 − ‖x‖₁)`
    Tent,
    /// `exp(−4 ‖x‖₂²)`
    Gaussian,
    /// `Π_j sin(π x_j)`, signed
    SineProduct,
}

pub const TARGET_NAMES: [&str; 3] = ["tent", "gaussian", "sine"];

#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub kind: TargetKind,
    pub dim: usize,
}

impl Target {
    pub fn new(name: &str, dim: usize) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::invalid(format!("target dimension {dim} outside 1..=3")));
        }
        let kind = match name {
            "tent" => TargetKind::Tent,
            "gaussian" => TargetKind::Gaussian,
            "sine" | "sine-product" => TargetKind::SineProduct,
            _ => {
                return Err(Error::invalid(format!(
                    "unknown target '{name}' (expected one of {})",
                    TARGET_NAMES.join(", ")
                )))
            }
        };
        Ok(Target { kind, dim })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TargetKind::Tent => "tent",
            TargetKind::Gaussian => "gaussian",
            TargetKind::SineProduct => "sine",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            TargetKind::Tent => (1.0 - x.iter().map(|v| v.abs()).sum::<f64>()).max(0.0),
            TargetKind::Gaussian => (-4.0 * x.iter().map(|v| v * v).sum::<f64>()).exp(),
            TargetKind::SineProduct => {
                if x.iter().any(|v| v.abs() > 1.0) {
                    0.0
                } else {
                    x.iter().map(|v| (std::f64::consts::PI * v).sin()).product()
                }
            }
        }
    }

    /// Box holding (essentially all of) the support.
    pub fn domain(&self) -> Domain {
        let h = match self.kind {
            TargetKind::Tent | TargetKind::SineProduct => 1.0,
            TargetKind::Gaussian => 1.5,
        };
        Domain::cube(self.dim, -h, h).expect("non-degenerate")
    }

    /// `sup |f| = 1` for every registered target.
    pub fn sup(&self) -> f64 {
        1.0
    }

    /// Bandwidth used by the error-vs-N sweep.
    pub fn default_epsilon(&self) -> f64 {
        match self.kind {
            TargetKind::Tent => 0.3,
            TargetKind::Gaussian => 0.3,
            TargetKind::SineProduct => 0.25,
        }
    }
}
