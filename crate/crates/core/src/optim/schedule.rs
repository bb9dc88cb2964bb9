use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global learning-rate schedule over `total` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    /// `lr0 (1 + cos(π s / T)) / 2`
    Cosine { lr0: f64 },
    /// `lr0 (1 - s / T)^power`
    Polynomial { lr0: f64, power: f64 },
    Constant { lr0: f64 },
}

impl LrSchedule {
    pub const DEFAULT_POWER: f64 = 2.0;

    pub fn lr0(&self) -> f64 {
        match *self {
            LrSchedule::Cosine { lr0 } | LrSchedule::Polynomial { lr0, .. } | LrSchedule::Constant { lr0 } => lr0,
        }
    }

    pub fn lr_at(&self, step: u64, total: u64) -> Result<f64> {
        if step > total {
            return Err(Error::invalid(format!("step {step} beyond schedule length {total}")));
        }
        let frac = if total == 0 { 0.0 } else { step as f64 / total as f64 };
        Ok(match *self {
            LrSchedule::Cosine { lr0 } => lr0 * (1.0 + (std::f64::consts::PI * frac).cos()) / 2.0,
            LrSchedule::Polynomial { lr0, power } => lr0 * (1.0 - frac).powf(power),
            LrSchedule::Constant { lr0 } => lr0,
        })
    }
}

/// Linear decay of the adder norm exponent from 2 at epoch 0 to 1 at
/// `decay_epochs`, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PSchedule {
    pub decay_epochs: f64,
    pub total_epochs: f64,
}

impl PSchedule {
    pub fn new(decay_epochs: f64, total_epochs: f64) -> Result<Self> {
        if !(0.0..=total_epochs).contains(&decay_epochs) {
            return Err(Error::invalid(format!(
                "p decay length {decay_epochs} outside [0, {total_epochs}]"
            )));
        }
        Ok(PSchedule {
            decay_epochs,
            total_epochs,
        })
    }

    /// Decay over the first 75% of training.
    pub fn default_for(total_epochs: usize) -> Self {
        PSchedule {
            decay_epochs: 0.75 * total_epochs as f64,
            total_epochs: total_epochs as f64,
        }
    }

    pub fn p_at_epoch(&self, epoch: f64) -> f64 {
        if self.decay_epochs <= 0.0 {
            return 1.0;
        }
        (2.0 - epoch.max(0.0) / self.decay_epochs).max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_points() {
        let s = LrSchedule::Cosine { lr0: 0.1 };
        assert_eq!(s.lr_at(0, 100).unwrap(), 0.1);
        assert!(s.lr_at(100, 100).unwrap().abs() < 1e-17);
        assert!((s.lr_at(50, 100).unwrap() - 0.05).abs() < 1e-16);
        assert!(s.lr_at(101, 100).is_err());
    }

    #[test]
    fn polynomial_and_constant() {
        let s = LrSchedule::Polynomial { lr0: 0.4, power: 2.0 };
        assert!((s.lr_at(50, 100).unwrap() - 0.1).abs() < 1e-16);
        assert_eq!(s.lr_at(100, 100).unwrap(), 0.0);
        assert_eq!(LrSchedule::Constant { lr0: 0.3 }.lr_at(7, 10).unwrap(), 0.3);
    }

    #[test]
    fn p_decay() {
        let s = PSchedule::new(600.0, 800.0).unwrap();
        assert_eq!(s.p_at_epoch(0.0), 2.0);
        assert_eq!(s.p_at_epoch(300.0), 1.5);
        assert_eq!(s.p_at_epoch(600.0), 1.0);
        assert_eq!(s.p_at_epoch(700.0), 1.0);
        assert!(PSchedule::new(900.0, 800.0).is_err());
        assert_eq!(PSchedule::default_for(8).decay_epochs, 6.0);
        assert_eq!(PSchedule::new(0.0, 5.0).unwrap().p_at_epoch(0.0), 1.0);
    }
}
