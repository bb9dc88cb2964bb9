//! Mini-batch training loop: forward, surrogate backward, adaptive NAG step,
//! with the norm exponent annealed per epoch.

use std::time::Instant;

use serde::Serialize;

use crate::data::{shuffle_batches, LabeledDataset};
use crate::error::{Error, Result};
use crate::layers::{GradientMode, Mode};
use crate::net::Network;
use crate::optim::{LrSchedule, OptimizerConfig, OptimizerState, PSchedule};
use crate::tensor::RngState;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// stop after this many steps instead of `epochs` full passes
    pub iterations: Option<u64>,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub optimizer: OptimizerConfig,
    /// `None` keeps every adder layer at its current `p`
    pub p_schedule: Option<PSchedule>,
    pub grad_mode: GradientMode,
}

impl TrainConfig {
    pub fn total_steps(&self, n: usize) -> Result<u64> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(match self.iterations {
            Some(it) => it,
            None => self.epochs as u64 * n.div_ceil(self.batch_size) as u64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// norm exponent of the adder layers, if any
    pub p: Option<f64>,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub wall_secs: f64,
}

/// Eval-mode mean loss and accuracy over a dataset.
pub fn evaluate(net: &Network, ds: &LabeledDataset) -> Result<(f64, f64)> {
    const CHUNK: usize = 500;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..ds.len()).collect();
    for chunk in idx.chunks(CHUNK) {
        let (x, y) = ds.batch(chunk)?;
        let logits = net.predict(&x)?;
        loss += net.loss(&logits, &y)?.0 * chunk.len() as f64;
        correct += net.classify(&logits).iter().zip(&y).filter(|(a, b)| a == b).count();
    }
    Ok((loss / ds.len() as f64, correct as f64 / ds.len() as f64))
}

fn current_p(net: &Network) -> Option<f64> {
    net.layers().iter().find_map(|l| match l {
        crate::net::Layer::Adder(a) => Some(a.p()),
        _ => None,
    })
}

/// Trains `net` in place. The first row (epoch 0) describes the untrained
/// network; one row follows per epoch. `on_epoch` sees each row as it is made.
pub fn train(
    net: &mut Network,
    train_set: &LabeledDataset,
    test_set: Option<&LabeledDataset>,
    cfg: &TrainConfig,
    rng: &mut RngState,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    let total = cfg.total_steps(train_set.len())?;
    let mut opt = OptimizerState::new(net, cfg.optimizer)?;
    let start = Instant::now();
    let mut rows = Vec::new();

    if let Some(ps) = cfg.p_schedule {
        net.set_p(ps.p_at_epoch(0.0));
    }
    let (loss0, acc0) = evaluate(net, train_set)?;
    let row = EpochMetrics {
        epoch: 0,
        p: current_p(net),
        lr: cfg.schedule.lr_at(0, total.max(1))?,
        train_loss: loss0,
        train_acc: acc0,
        test_acc: test_set.map(|t| evaluate(net, t).map(|r| r.1)).transpose()?,
        wall_secs: start.elapsed().as_secs_f64(),
    };
    on_epoch(&row);
    rows.push(row);

    let mut step = 0u64;
    let mut epoch = 0usize;
    while step < total {
        if let Some(ps) = cfg.p_schedule {
            net.set_p(ps.p_at_epoch(epoch as f64));
        }
        let p = current_p(net);
        epoch += 1;
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        let mut lr = 0.0;
        for batch in shuffle_batches(train_set.len(), cfg.batch_size, rng)? {
            if step >= total {
                break;
            }
            if batch.len() < 2 {
                // batch norm statistics need two samples
                continue;
            }
            lr = cfg.schedule.lr_at(step, total)?;
            let (x, y) = train_set.batch(&batch)?;
            let (logits, trace) = net.forward(&x, Mode::Train)?;
            let (loss, dl) = net.loss(&logits, &y)?;
            let grads = net.backward(&trace, &dl, cfg.grad_mode)?;
            opt.nag_step(net, &grads, lr)?;
            loss_sum += loss * batch.len() as f64;
            correct += net.classify(&logits).iter().zip(&y).filter(|(a, b)| a == b).count();
            seen += batch.len();
            step += 1;
        }
        if seen == 0 {
            return Err(Error::invalid("no usable batch: dataset smaller than two samples"));
        }
        if !net.flat_params().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
        }
        let row = EpochMetrics {
            epoch,
            p,
            lr,
            train_loss: loss_sum / seen as f64,
            train_acc: correct as f64 / seen as f64,
            test_acc: test_set.map(|t| evaluate(net, t).map(|r| r.1)).transpose()?,
            wall_secs: start.elapsed().as_secs_f64(),
        };
        on_epoch(&row);
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ToyTask;
    use crate::net::{LayerKind, NetworkSpec};

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            iterations: None,
            batch_size: 32,
            schedule: LrSchedule::Cosine { lr0: 0.1 },
            optimizer: OptimizerConfig::default(),
            p_schedule: Some(PSchedule::default_for(epochs)),
            grad_mode: GradientMode::FullPrecision,
        }
    }

    #[test]
    fn zero_epochs_only_initial_row() {
        let mut rng = RngState::new(0);
        let ds = ToyTask::Linear.generate(64, &mut rng).unwrap();
        let mut net = Network::build(NetworkSpec::two_layer(LayerKind::Adder, 3), &mut rng).unwrap();
        let before = net.clone();
        let rows = train(&mut net, &ds, None, &cfg(0), &mut rng, |_| {}).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].epoch, 0);
        assert_eq!(net.flat_params(), before.flat_params());
    }

    #[test]
    fn deterministic_and_learning() {
        let run = || {
            let mut rng = RngState::new(1);
            let ds = ToyTask::Ball.generate(128, &mut rng).unwrap();
            let mut net = Network::build(NetworkSpec::two_layer(LayerKind::Adder, 1), &mut rng).unwrap();
            let mut c = cfg(300);
            c.batch_size = 128;
            c.p_schedule = None;
            c.optimizer.eta = Some(0.2);
            let rows = train(&mut net, &ds, Some(&ds), &c, &mut rng, |_| {}).unwrap();
            (rows, net.flat_params())
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(pa, pb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.train_loss, x.train_acc, x.test_acc), (y.train_loss, y.train_acc, y.test_acc));
        }
        assert_eq!(a.len(), 301);
        assert_eq!(a.last().unwrap().p, Some(1.0));
        assert!(a.last().unwrap().test_acc.unwrap() > 0.95);
    }

    #[test]
    fn iteration_budget_is_respected() {
        let mut rng = RngState::new(2);
        let ds = ToyTask::Ball.generate(100, &mut rng).unwrap();
        let mut net = Network::build(NetworkSpec::two_layer(LayerKind::Adder, 1), &mut rng).unwrap();
        let mut c = cfg(1);
        c.iterations = Some(10);
        c.p_schedule = None;
        // 100 samples / 32 -> 4 batches per epoch, 10 steps -> 3 epochs
        let rows = train(&mut net, &ds, None, &c, &mut rng, |_| {}).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].p, Some(1.0));
    }
}
