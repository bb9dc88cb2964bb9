//! Two-dimensional binary classification tasks. Coordinates are drawn from
//! an isotropic normal distribution centred at the origin.

use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::{RngState, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyTask {
    /// inside radius 10 vs outside radius 15
    Ball,
    /// inside either of two radius-10 balls at (10, 10) and (-10, -10)
    MultiBall,
    /// `x y >= 0`
    Linear,
}

impl ToyTask {
    pub fn parse(name: &str) -> Option<ToyTask> {
        match name {
            "ball" => Some(ToyTask::Ball),
            "multiball" | "multi-ball" => Some(ToyTask::MultiBall),
            "linear" => Some(ToyTask::Linear),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ToyTask::Ball => "ball",
            ToyTask::MultiBall => "multiball",
            ToyTask::Linear => "linear",
        }
    }

    /// Standard deviation of each coordinate.
    pub fn stddev(&self) -> f64 {
        match self {
            ToyTask::Ball | ToyTask::Linear => 10.0,
            ToyTask::MultiBall => 15.0,
        }
    }

    /// Label of a point, or `None` if the task discards it.
    pub fn label(&self, x: f64, y: f64) -> Option<usize> {
        match self {
            ToyTask::Ball => {
                let r = x.hypot(y);
                if r < 10.0 {
                    Some(1)
                } else if r > 15.0 {
                    Some(0)
                } else {
                    None
                }
            }
            ToyTask::MultiBall => {
                let inside = (x - 10.0).hypot(y - 10.0) < 10.0 || (x + 10.0).hypot(y + 10.0) < 10.0;
                Some(usize::from(inside))
            }
            ToyTask::Linear => Some(usize::from(x * y >= 0.0)),
        }
    }

    /// Plotting window covering almost all samples.
    pub fn bounds(&self) -> [f64; 4] {
        let r = 3.0 * self.stddev();
        [-r, r, -r, r]
    }

    pub fn generate(&self, n: usize, rng: &mut RngState) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(Error::invalid("toy dataset size must be positive"));
        }
        let sd = self.stddev();
        let mut data = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        while labels.len() < n {
            let x = sd * rng.standard_normal();
            let y = sd * rng.standard_normal();
            if let Some(l) = self.label(x, y) {
                data.push(x);
                data.push(y);
                labels.push(l);
            }
        }
        LabeledDataset::new(self.name(), Tensor::from_vec(&[n, 1, 1, 2], data)?, labels, 2)
    }
}

pub fn gen_unit_ball(n: usize, rng: &mut RngState) -> Result<LabeledDataset> {
    ToyTask::Ball.generate(n, rng)
}

pub fn gen_multi_ball(n: usize, rng: &mut RngState) -> Result<LabeledDataset> {
    ToyTask::MultiBall.generate(n, rng)
}

pub fn gen_linear(n: usize, rng: &mut RngState) -> Result<LabeledDataset> {
    ToyTask::Linear.generate(n, rng)
}
