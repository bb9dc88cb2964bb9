use addernet::approx::{expectation_check, relu_sum_check, masked_linear_check, phi_n_sweep, Target, TARGET_NAMES};
use addernet::RngState;

use super::{invalid, Outcome, Session};
use crate::config::List;
use crate::output::num;
use crate::ApproxArgs;

/// Five probes inside `[−0.8, 0.8]^dim`: the origin, then fixed points for
/// `dim = 2` and seeded uniform draws otherwise.
pub fn expectation_probes(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 2 {
        return vec![
            vec![0.0, 0.0],
            vec![0.3, 0.2],
            vec![-0.5, 0.1],
            vec![0.6, -0.3],
            vec![0.1, 0.8],
        ];
    }
    let mut rng = RngState::new(seed).fork(17);
    let mut probes = vec![vec![0.0; dim]];
    probes.extend((0..4).map(|_| (0..dim).map(|_| rng.uniform(-0.8, 0.8)).collect()));
    probes
}

pub fn run(a: &ApproxArgs) -> anyhow::Result<Outcome> {
    let mut s = Session::start("approx", &a.common)?;
    let r = &mut s.resolver;
    let default_targets = List(TARGET_NAMES.iter().map(|t| t.to_string()).collect());
    let names = r.value("targets", a.targets.clone(), default_targets)?;
    let dim = r.value("dim", a.dim, 2usize)?;
    let ns = r.value("ns", a.ns.clone(), List(vec![16usize, 64, 256]))?;
    let seeds = r.value("seeds", a.seeds, 5usize)?;
    let epsilon = r.optional("epsilon", a.epsilon)?;
    let samples = r.value("samples", a.samples, 20_000usize)?;
    let quadrature = r.value("quadrature", a.quadrature, 400usize)?;
    let instances = r.value("construction-instances", a.construction_instances, 50usize)?;
    let construction_probes = r.value("construction-probes", a.construction_probes, 1000usize)?;
    let draws = r.value("draws", a.draws, 2000usize)?;
    let expectation_n = r.value("expectation-n", a.expectation_n, 16usize)?;
    let seed = s.seed;
    let mut prep = s.finish()?;

    let targets: Vec<Target> = names.0.iter().map(|n| Target::new(n, dim)).collect::<Result<_, _>>()?;
    if !ns.0.is_empty() && seeds == 0 {
        return Err(invalid("the error sweep needs at least one seed").into());
    }
    if ns.0.contains(&0) {
        return Err(invalid("centre counts must be positive").into());
    }
    let seed_list: Vec<u64> = (0..seeds as u64).map(|i| seed.wrapping_add(i)).collect();
    let mut summary = Vec::new();

    let mut sweep = prep.csv(&["target", "n", "epsilon", "l1_error", "stderr"]);
    for t in &targets {
        if ns.0.is_empty() {
            break;
        }
        let eps = epsilon.unwrap_or_else(|| t.default_epsilon());
        let rows = phi_n_sweep(t, eps, &ns.0, &seed_list, samples, quadrature)?;
        let decreasing = rows.windows(2).all(|w| w[1].l1_error < w[0].l1_error);
        for row in &rows {
            sweep.push(vec![
                t.name().to_string(),
                row.n.to_string(),
                num(row.epsilon),
                num(row.l1_error),
                num(row.stderr),
            ]);
        }
        summary.push(format!("{}: L1 error decreasing in N: {decreasing}", t.name()));
    }
    prep.write_csv("approx.csv", &sweep)?;

    let mut checks = prep.csv(&["check", "target", "size", "value", "stderr", "reference", "z"]);
    let root = RngState::new(seed);
    if instances > 0 {
        let terms = 5;
        let l1 = relu_sum_check(instances, dim, terms, construction_probes, &mut root.fork(1))?;
        checks.push(vec!["relu_sum_residual".into(), String::new(), terms.to_string(), num(l1), String::new(), "0".into(), String::new()]);
        let m = 4;
        let l2 = masked_linear_check(instances, m, dim, construction_probes, &mut root.fork(2))?;
        checks.push(vec!["masked_linear_residual".into(), String::new(), m.to_string(), num(l2), String::new(), "0".into(), String::new()]);
        summary.push(format!("exact constructions: max residual {:.2e} / {:.2e}", l1, l2));
    }
    if draws > 0 {
        let probes = expectation_probes(dim, seed);
        for (i, t) in targets.iter().enumerate() {
            let eps = epsilon.unwrap_or_else(|| t.default_epsilon());
            let rows = expectation_check(t, eps, expectation_n, draws, &probes, &mut root.fork(10 + i as u64))?;
            let worst = rows.iter().map(|r| r.z_score()).fold(0.0, f64::max);
            for row in rows {
                checks.push(vec![
                    "expectation".into(),
                    t.name().to_string(),
                    expectation_n.to_string(),
                    num(row.mean),
                    num(row.stderr),
                    num(row.psi),
                    num(row.z_score()),
                ]);
            }
            summary.push(format!("{}: max |z| over probes {:.2}", t.name(), worst));
        }
    }
    prep.write_csv("constructions.csv", &checks)?;
    Ok(prep.outcome(summary))
}
