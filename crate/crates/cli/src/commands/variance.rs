use addernet::analysis::{grad_norm_table, variance_report};
use addernet::data::{load_mnist_dir, shuffle_batches};
use addernet::net::{LayerKind, Network, NetworkSpec};
use addernet::RngState;

use super::{default_mnist_dir, invalid, path_setting, Outcome, Session};
use crate::config::List;
use crate::output::num;
use crate::VarianceArgs;

pub fn run(a: &VarianceArgs) -> anyhow::Result<Outcome> {
    let mut s = Session::start("variance", &a.common)?;
    let r = &mut s.resolver;
    let kernel = r.value("kernel", a.kernel, 3usize)?;
    let c_in = r.value("c-in", a.c_in, 16usize)?;
    let c_out = r.value("c-out", a.c_out, 16usize)?;
    let var_x = r.value("var-x", a.var_x, 1.0)?;
    let var_f = r.value("var-f", a.var_f.clone(), List(vec![1.0, 1e-3]))?;
    let batch = r.value("batch", a.batch, 6250usize)?;
    let gn_seeds = r.value("gradnorm-seeds", a.gradnorm_seeds, 5usize)?;
    let gn_batch = r.value("gradnorm-batch", a.gradnorm_batch, 256usize)?;
    let data_dir = if gn_seeds > 0 {
        Some(path_setting(r, "data-dir", &a.data_dir, &default_mnist_dir())?)
    } else {
        None
    };
    let seed = s.seed;
    let mut prep = s.finish()?;
    let root = RngState::new(seed);
    let mut summary = Vec::new();

    let mut csv = prep.csv(&[
        "kernel",
        "c_in",
        "c_out",
        "var_x",
        "var_f",
        "outputs",
        "conv_var",
        "conv_predicted",
        "adder_var",
        "adder_predicted_gaussian",
        "adder_predicted_rough",
        "ratio",
    ]);
    for (i, &vf) in var_f.0.iter().enumerate() {
        let v = variance_report(kernel, c_in, c_out, var_x, vf, batch, &mut root.fork(i as u64))?;
        csv.push(vec![
            v.d.to_string(),
            v.c_in.to_string(),
            v.c_out.to_string(),
            num(v.var_x),
            num(v.var_f),
            v.outputs.to_string(),
            num(v.conv_var),
            num(v.conv_predicted),
            num(v.adder_var),
            num(v.adder_predicted_gaussian),
            num(v.adder_predicted_rough),
            num(v.ratio),
        ]);
        summary.push(format!(
            "var_f={vf}: conv {:.4e} (predicted {:.4e}), adder {:.4e}, ratio {:.1}",
            v.conv_var, v.conv_predicted, v.adder_var, v.ratio
        ));
    }
    prep.write_csv("variance.csv", &csv)?;

    if let Some(dir) = data_dir {
        if gn_batch < 2 {
            return Err(invalid("gradient-norm batch needs at least two samples").into());
        }
        let (train_set, _, _) = load_mnist_dir(&dir)?;
        let mut gn = prep.csv(&["seed", "layer", "adder", "conv", "ordering_holds"]);
        let mut holds = 0;
        for k in 0..gn_seeds as u64 {
            let s = seed.wrapping_add(k);
            let mut rng = RngState::new(s);
            let mut adder = Network::build(NetworkSpec::lenet5_bn(LayerKind::Adder, false), &mut rng)?;
            let mut conv = Network::build(NetworkSpec::lenet5_bn(LayerKind::Conv, false), &mut rng)?;
            let idx = &shuffle_batches(train_set.len(), gn_batch, &mut rng)?[0];
            let (x, y) = train_set.batch(idx)?;
            let table = grad_norm_table(&mut adder, &mut conv, &x, &y)?;
            let ok = table.ordering_holds();
            holds += usize::from(ok);
            for row in &table.rows {
                gn.push(vec![s.to_string(), row.layer.to_string(), num(row.adder), num(row.conv), ok.to_string()]);
            }
        }
        prep.write_csv("gradnorm.csv", &gn)?;
        summary.push(format!("gradient-norm ordering holds in {holds}/{gn_seeds} seeds"));
    }
    Ok(prep.outcome(summary))
}
