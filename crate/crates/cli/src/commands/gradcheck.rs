use addernet::analysis::{gradient_suite, SuiteConfig};

use super::{Outcome, Session};
use crate::output::num;
use crate::GradcheckArgs;

pub fn run(a: &GradcheckArgs) -> anyhow::Result<Outcome> {
    let mut s = Session::start("gradcheck", &a.common)?;
    let r = &mut s.resolver;
    let d = SuiteConfig::default();
    let cfg = SuiteConfig {
        coordinates: r.value("coordinates", a.coordinates, d.coordinates)?,
        step: r.value("step", a.step, d.step)?,
        tolerance: r.value("tolerance", a.tolerance, d.tolerance)?,
    };
    let seed = s.seed;
    let mut prep = s.finish()?;
    let rows = gradient_suite(&cfg, seed)?;
    let mut csv = prep.csv(&[
        "component",
        "dimension",
        "factor",
        "checked",
        "excluded",
        "max_rel_error",
        "tolerance",
        "passed",
    ]);
    let mut summary = Vec::new();
    for c in &rows {
        csv.push(vec![
            c.component.into(),
            c.dimension.to_string(),
            num(c.factor),
            c.report.checked.to_string(),
            c.report.excluded.len().to_string(),
            num(c.report.max_rel_error),
            num(c.report.tolerance),
            c.report.passed().to_string(),
        ]);
        summary.push(format!(
            "{:<12} checked {:>3} excluded {:>3} max rel error {:.2e} {}",
            c.component,
            c.report.checked,
            c.report.excluded.len(),
            c.report.max_rel_error,
            if c.report.passed() { "ok" } else { "FAIL" }
        ));
    }
    prep.write_csv("gradcheck.csv", &csv)?;
    Ok(prep.outcome(summary))
}
