use addernet::analysis::props::{dyadic_grid, full_descent_iterate, sign_descent_reaches_optimum};
use addernet::analysis::{simulate_full_descent, simulate_sign_descent, ConvergenceTrace};

use super::{invalid, Outcome, Session};
use crate::output::num;
use crate::PropsArgs;

fn closed_form_error(t: &ConvergenceTrace, x: f64, f0: f64, alpha: f64) -> f64 {
    t.iterates
        .iter()
        .enumerate()
        .map(|(j, it)| (it[0] - full_descent_iterate(x, f0, alpha, j)).abs())
        .fold(0.0, f64::max)
}

fn monotone(t: &ConvergenceTrace) -> bool {
    t.objective.windows(2).all(|w| w[1] <= w[0])
}

pub fn run(a: &PropsArgs) -> anyhow::Result<Outcome> {
    let mut s = Session::start("props", &a.common)?;
    let r = &mut s.resolver;
    let grid = r.value("grid", a.grid, 200usize)?;
    let max_iters = r.value("max-iters", a.max_iters, 10_000usize)?;
    let y = r.value("y", a.y, -1.0)?;
    let mut prep = s.finish()?;
    if grid == 0 {
        return Err(invalid("the grid needs at least one case").into());
    }
    if !(y < 0.0) {
        return Err(invalid(format!("y = {y} must be negative")).into());
    }

    let mut csv = prep.csv(&[
        "case",
        "mode",
        "x",
        "f0",
        "alpha",
        "ratio_integral",
        "verdict",
        "steps",
        "final_gap",
        "amplitude",
        "closed_form_error",
        "monotone",
    ]);
    let (mut agree, mut full_ok) = (0usize, 0usize);
    let cases = dyadic_grid(grid);
    for (i, c) in cases.iter().enumerate() {
        let integral = sign_descent_reaches_optimum(&[c.x], &[c.f0], c.alpha);
        let sign = simulate_sign_descent(&[c.x], &[c.f0], y, c.alpha, max_iters)?;
        let full = simulate_full_descent(&[c.x], &[c.f0], y, c.alpha, max_iters)?;
        if (sign.verdict == addernet::analysis::Verdict::Converged) == integral {
            agree += 1;
        }
        let cf = closed_form_error(&full, c.x, c.f0, c.alpha);
        if full.verdict == addernet::analysis::Verdict::Converged && monotone(&full) && cf <= 1e-12 {
            full_ok += 1;
        }
        for (mode, t, cf) in [("sign", &sign, None), ("full", &full, Some(cf))] {
            csv.push(vec![
                i.to_string(),
                mode.into(),
                num(c.x),
                num(c.f0),
                num(c.alpha),
                integral.to_string(),
                t.verdict.name().into(),
                t.steps().to_string(),
                num(*t.gap.last().expect("non-empty")),
                num(t.amplitude),
                cf.map_or_else(String::new, num),
                monotone(t).to_string(),
            ]);
        }
    }
    prep.write_csv("props.csv", &csv)?;
    Ok(prep.outcome(vec![
        format!("sign descent: verdict matches integrality in {agree}/{grid} cases"),
        format!("full descent: converged, monotone and closed-form in {full_ok}/{grid} cases"),
    ]))
}
