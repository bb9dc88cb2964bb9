use std::fmt;
use std::str::FromStr;

use addernet::data::{load_mnist_dir, LabeledDataset, ToyTask};
use addernet::layers::GradientMode;
use addernet::net::{checkpoint, LayerKind, Network, NetworkSpec};
use addernet::optim::{LrSchedule, OptimizerConfig, PSchedule};
use addernet::train::{train, EpochMetrics, TrainConfig};
use addernet::{Error, RngState};

use super::{default_mnist_dir, invalid, parse_arch, parse_eta, path_setting, Arch, Eta, Outcome, Session};
use crate::config::List;
use crate::output::{num, opt_num, CsvReport};
use crate::TrainArgs;

/// Layer kind plus how the adder norm exponent is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerMode {
    AdderL1,
    AdderLpSchedule,
    AdderL2,
    Conv,
}

impl LayerMode {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerMode::Conv => LayerKind::Conv,
            _ => LayerKind::Adder,
        }
    }
}

impl FromStr for LayerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "adder-l1" => Ok(LayerMode::AdderL1),
            "adder-lp-schedule" => Ok(LayerMode::AdderLpSchedule),
            "adder-l2" => Ok(LayerMode::AdderL2),
            "conv" => Ok(LayerMode::Conv),
            other => Err(format!(
                "unknown layer mode '{other}' (adder-l1, adder-lp-schedule, adder-l2, conv)"
            )),
        }
    }
}

impl fmt::Display for LayerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerMode::AdderL1 => "adder-l1",
            LayerMode::AdderLpSchedule => "adder-lp-schedule",
            LayerMode::AdderL2 => "adder-l2",
            LayerMode::Conv => "conv",
        })
    }
}

pub(crate) fn parse_grad_mode(s: &str) -> Result<GradientMode, Error> {
    match s {
        "full" => Ok(GradientMode::FullPrecision),
        "sign" => Ok(GradientMode::SignGrad),
        _ => Err(invalid(format!("unknown gradient mode '{s}' (full, sign)"))),
    }
}

pub(crate) fn parse_schedule(s: &str, lr0: f64) -> Result<LrSchedule, Error> {
    if !(lr0 > 0.0) {
        return Err(invalid(format!("lr0 {lr0} must be positive")));
    }
    match s {
        "cosine" => Ok(LrSchedule::Cosine { lr0 }),
        "poly" => Ok(LrSchedule::Polynomial {
            lr0,
            power: LrSchedule::DEFAULT_POWER,
        }),
        "constant" => Ok(LrSchedule::Constant { lr0 }),
        _ => Err(invalid(format!("unknown schedule '{s}' (cosine, poly, constant)"))),
    }
}

/// Everything a single training run needs besides the data.
#[derive(Clone, Debug)]
pub struct TrainPlan {
    pub spec: NetworkSpec,
    pub mode: LayerMode,
    pub config: TrainConfig,
}

impl TrainPlan {
    pub fn with(&self, eta: Option<f64>, e_decay: f64) -> Result<TrainPlan, Error> {
        let mut p = self.clone();
        p.config.optimizer.eta = eta;
        if p.mode == LayerMode::AdderLpSchedule {
            p.config.p_schedule = Some(PSchedule::new(e_decay, p.config.epochs as f64)?);
        }
        Ok(p)
    }
}

/// Builds the network from `init` and trains it with `rng`.
pub fn train_run(
    plan: &TrainPlan,
    train_set: &LabeledDataset,
    test_set: Option<&LabeledDataset>,
    seed: u64,
) -> Result<(Network, Vec<EpochMetrics>), Error> {
    let root = RngState::new(seed);
    let mut net = Network::build(plan.spec.clone(), &mut root.fork(2))?;
    match plan.mode {
        LayerMode::AdderL1 => net.set_p(1.0),
        LayerMode::AdderL2 => net.set_p(2.0),
        LayerMode::AdderLpSchedule | LayerMode::Conv => {}
    }
    let rows = train(&mut net, train_set, test_set, &plan.config, &mut root.fork(3), |_| {})?;
    Ok((net, rows))
}

fn load_data(
    dataset: &str,
    dir: &std::path::Path,
    samples: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), Error> {
    if dataset == "mnist" {
        let (tr, te, _) = load_mnist_dir(dir)?;
        return Ok((tr, te));
    }
    let task = ToyTask::parse(dataset)
        .ok_or_else(|| invalid(format!("unknown dataset '{dataset}' (mnist, ball, multiball, linear)")))?;
    let root = RngState::new(seed);
    Ok((
        task.generate(samples, &mut root.fork(0))?,
        task.generate(samples, &mut root.fork(1))?,
    ))
}

fn limit(ds: LabeledDataset, n: Option<usize>) -> Result<LabeledDataset, Error> {
    match n {
        Some(n) if n < ds.len() => ds.take(n),
        _ => Ok(ds),
    }
}

fn metrics_csv(prep: &super::Prepared, rows: &[EpochMetrics], wall: bool) -> CsvReport {
    let mut header = vec!["epoch", "p", "lr", "train_loss", "train_acc", "test_acc"];
    if wall {
        header.push("wall_secs");
    }
    let mut csv = prep.csv(&header);
    for r in rows {
        let mut row = vec![
            r.epoch.to_string(),
            opt_num(r.p),
            num(r.lr),
            num(r.train_loss),
            num(r.train_acc),
            opt_num(r.test_acc),
        ];
        if wall {
            row.push(num(r.wall_secs));
        }
        csv.push(row);
    }
    csv
}

/// Accuracy every sweep point must reach.
pub const SWEEP_TARGET: f64 = 0.97;

pub fn run(a: &TrainArgs) -> anyhow::Result<Outcome> {
    let mut s = Session::start("train", &a.common)?;
    let r = &mut s.resolver;
    let dataset = r.value("dataset", a.dataset.clone(), "mnist".to_string())?;
    let data_dir = if dataset == "mnist" {
        Some(path_setting(r, "data-dir", &a.data_dir, &default_mnist_dir())?)
    } else {
        None
    };
    let default_arch = if dataset == "mnist" { Arch::Lenet5Bn } else { Arch::AdderMlp(3) };
    let arch = r.value("arch", parse_arch(&a.arch)?, default_arch)?;
    let default_mode = match arch.implied_kind() {
        Some(LayerKind::Conv) => LayerMode::Conv,
        Some(LayerKind::Adder) => LayerMode::AdderL1,
        None => LayerMode::AdderLpSchedule,
    };
    let mode_flag = a.mode.as_deref().map(str::parse).transpose().map_err(invalid)?;
    let mode: LayerMode = r.value("mode", mode_flag, default_mode)?;
    if let Some(k) = arch.implied_kind() {
        if k != mode.kind() {
            return Err(invalid(format!("architecture {arch} does not allow layer mode {mode}")).into());
        }
    }
    let epochs = r.value("epochs", a.epochs, 10usize)?;
    let iterations = r.optional("iterations", a.iterations)?;
    let batch_size = r.value("batch-size", a.batch_size, 256usize)?;
    let lr0 = r.value("lr0", a.lr0, 0.1)?;
    let schedule = r.value("schedule", a.schedule.clone(), "cosine".to_string())?;
    let default_eta = Eta((mode != LayerMode::Conv).then_some(0.2));
    let eta = r.value("eta", parse_eta(&a.eta)?, default_eta)?;
    let e_decay = if mode == LayerMode::AdderLpSchedule {
        r.value("e-decay", a.e_decay, 0.75 * epochs as f64)?
    } else {
        0.0
    };
    let momentum = r.value("momentum", a.momentum, 0.9)?;
    let weight_decay = r.value("weight-decay", a.weight_decay, 5e-4)?;
    let grad_mode = r.value("grad-mode", a.grad_mode.clone(), "full".to_string())?;
    let train_limit = r.optional("train-limit", a.train_limit)?;
    let test_limit = r.optional("test-limit", a.test_limit)?;
    let samples = if dataset == "mnist" {
        0
    } else {
        r.value("samples", a.samples, 128usize)?
    };
    let sweep_eta = r.value("sweep-eta", a.sweep_eta.clone(), List(Vec::new()))?;
    let sweep_decay = r.value("sweep-decay", a.sweep_decay.clone(), List(Vec::new()))?;
    let seed = s.seed;
    let wall = s.wall_time;

    let spec = arch.spec(mode.kind())?;
    let config = TrainConfig {
        epochs,
        iterations,
        batch_size,
        schedule: parse_schedule(&schedule, lr0)?,
        optimizer: OptimizerConfig {
            momentum,
            weight_decay,
            eta: eta.0,
        },
        p_schedule: None,
        grad_mode: parse_grad_mode(&grad_mode)?,
    };
    config.optimizer.validate()?;
    let plan = TrainPlan { spec, mode, config }.with(eta.0, e_decay)?;
    let mut prep = s.finish()?;

    let (train_set, test_set) = load_data(&dataset, data_dir.as_deref().unwrap_or(std::path::Path::new("")), samples, seed)?;
    let train_set = limit(train_set, train_limit)?;
    let test_set = limit(test_set, test_limit)?;
    let want = plan.spec.input;
    if train_set.sample_shape() != want {
        return Err(Error::InvalidShape {
            shape: train_set.sample_shape().to_vec(),
            reason: format!("architecture {arch} expects samples of shape {want:?}"),
        }
        .into());
    }

    if !sweep_eta.0.is_empty() || !sweep_decay.0.is_empty() {
        let etas = if sweep_eta.0.is_empty() { vec![eta.0] } else { sweep_eta.0.iter().map(|&v| Some(v)).collect() };
        let decays = if sweep_decay.0.is_empty() { vec![e_decay] } else { sweep_decay.0.clone() };
        let mut csv = prep.csv(&["eta", "e_decay", "train_acc", "test_acc", "reached_target"]);
        let mut summary = Vec::new();
        for &e in &etas {
            for &d in &decays {
                let point = plan.with(e, d)?;
                let (_, rows) = train_run(&point, &train_set, Some(&test_set), seed)?;
                let last = rows.last().expect("initial row");
                let test = last.test_acc.unwrap_or(0.0);
                let ok = test >= SWEEP_TARGET;
                let eta_s = Eta(e).to_string();
                csv.push(vec![eta_s.clone(), num(d), num(last.train_acc), num(test), ok.to_string()]);
                summary.push(format!("eta={eta_s} e_decay={d} test_acc={test:.4}"));
            }
        }
        prep.write_csv("sweep.csv", &csv)?;
        return Ok(prep.outcome(summary));
    }

    let (net, rows) = train_run(&plan, &train_set, Some(&test_set), seed)?;
    prep.write_csv("train.csv", &metrics_csv(&prep, &rows, wall))?;
    let ckpt = prep.path("checkpoint.bin");
    checkpoint::save(&net, &ckpt)?;
    let last = rows.last().expect("initial row");
    Ok(prep.outcome(vec![format!(
        "epochs={} train_acc={:.4} test_acc={}",
        last.epoch,
        last.train_acc,
        last.test_acc.map_or("-".into(), |v| format!("{v:.4}"))
    )]))
}
