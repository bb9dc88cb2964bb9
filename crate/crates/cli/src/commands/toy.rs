use addernet::data::{LabeledDataset, ToyTask};
use addernet::layers::GradientMode;
use addernet::net::{LayerKind, Network, NetworkSpec};
use addernet::optim::{LrSchedule, OptimizerConfig};
use addernet::train::{train, EpochMetrics, TrainConfig};
use addernet::{Error, RngState};

use super::{invalid, parse_eta, Eta, Outcome, Session};
use crate::output::{num, opt_num, render_boundary};
use crate::ToyArgs;

/// Two-layer toy classifier setup. The default is full-batch NAG on 128
/// samples for 10,000 iterations with a cosine schedule from 0.1.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyRecipe {
    pub task: ToyTask,
    pub kind: LayerKind,
    pub hidden: usize,
    pub samples: usize,
    pub iterations: u64,
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// ignored for multiplication-based nets
    pub eta: Option<f64>,
}

impl ToyRecipe {
    pub fn new(task: ToyTask, kind: LayerKind, hidden: usize) -> Self {
        ToyRecipe {
            task,
            kind,
            hidden,
            samples: 128,
            iterations: 10_000,
            batch_size: 128,
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            eta: Some(0.2),
        }
    }
}

pub struct ToyResult {
    pub data: LabeledDataset,
    pub net: Network,
    pub rows: Vec<EpochMetrics>,
}

impl ToyResult {
    /// Eval-mode accuracy on the training samples after the last step.
    pub fn train_acc(&self) -> f64 {
        self.rows.last().expect("initial row").train_acc
    }
}

pub fn run_recipe(recipe: &ToyRecipe, seed: u64) -> Result<ToyResult, Error> {
    if recipe.hidden == 0 {
        return Err(invalid("need at least one hidden unit"));
    }
    let mut rng = RngState::new(seed);
    let data = recipe.task.generate(recipe.samples, &mut rng)?;
    let mut net = Network::build(NetworkSpec::two_layer(recipe.kind, recipe.hidden), &mut rng)?;
    let cfg = TrainConfig {
        epochs: 0,
        iterations: Some(recipe.iterations),
        batch_size: recipe.batch_size,
        schedule: LrSchedule::Cosine { lr0: recipe.lr0 },
        optimizer: OptimizerConfig {
            momentum: recipe.momentum,
            weight_decay: recipe.weight_decay,
            eta: if recipe.kind == LayerKind::Adder { recipe.eta } else { None },
        },
        p_schedule: None,
        grad_mode: GradientMode::FullPrecision,
    };
    let rows = train(&mut net, &data, None, &cfg, &mut rng, |_| {})?;
    Ok(ToyResult { data, net, rows })
}

pub(crate) fn parse_net(s: &str) -> Result<LayerKind, Error> {
    match s {
        "adder" => Ok(LayerKind::Adder),
        "mlp" | "conv" => Ok(LayerKind::Conv),
        _ => Err(invalid(format!("unknown net kind '{s}' (adder, mlp)"))),
    }
}

pub fn run(a: &ToyArgs) -> anyhow::Result<Outcome> {
    let mut s = Session::start("toy", &a.common)?;
    let r = &mut s.resolver;
    let task_name = r.value("task", a.task.clone(), "ball".to_string())?;
    let task = ToyTask::parse(&task_name)
        .ok_or_else(|| invalid(format!("unknown toy task '{task_name}' (ball, multiball, linear)")))?;
    let hidden = r.value("hidden", a.hidden, 1usize)?;
    let net_name = r.value("net", a.net.clone(), "adder".to_string())?;
    let kind = parse_net(&net_name)?;
    let mut recipe = ToyRecipe::new(task, kind, hidden);
    recipe.samples = r.value("samples", a.samples, recipe.samples)?;
    recipe.iterations = r.value("iterations", a.iterations, recipe.iterations)?;
    recipe.batch_size = r.value("batch-size", a.batch_size, recipe.batch_size)?;
    recipe.lr0 = r.value("lr0", a.lr0, recipe.lr0)?;
    recipe.momentum = r.value("momentum", a.momentum, recipe.momentum)?;
    recipe.weight_decay = r.value("weight-decay", a.weight_decay, recipe.weight_decay)?;
    let default_eta = Eta(if kind == LayerKind::Adder { recipe.eta } else { None });
    recipe.eta = r.value("eta", parse_eta(&a.eta)?, default_eta)?.0;
    let resolution = r.value("resolution", a.resolution, 200usize)?;
    let log_every = r.value("log-every", a.log_every, 500usize)?.max(1);
    let seed = s.seed;
    let wall = s.wall_time;
    let mut prep = s.finish()?;

    let res = run_recipe(&recipe, seed)?;
    let mut header = vec!["epoch", "p", "lr", "train_loss", "train_acc"];
    if wall {
        header.push("wall_secs");
    }
    let mut csv = prep.csv(&header);
    let last = res.rows.len() - 1;
    for (i, row) in res.rows.iter().enumerate() {
        if i % log_every != 0 && i != last {
            continue;
        }
        let mut cells = vec![
            row.epoch.to_string(),
            opt_num(row.p),
            num(row.lr),
            num(row.train_loss),
            num(row.train_acc),
        ];
        if wall {
            cells.push(num(row.wall_secs));
        }
        csv.push(cells);
    }
    prep.write_csv("toy.csv", &csv)?;
    let grid = res.net.predict_grid(task.bounds(), (resolution, resolution))?;
    let pgm = prep.path("boundary.pgm");
    render_boundary(&grid, 2, &pgm)?;
    Ok(prep.outcome(vec![format!(
        "task={} net={} hidden={} train_acc={:.4}",
        task.name(),
        net_name,
        hidden,
        res.train_acc()
    )]))
}
