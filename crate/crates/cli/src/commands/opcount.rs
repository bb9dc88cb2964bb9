use addernet::net::{count_ops, LayerKind};

use super::{parse_arch, Arch, Outcome, Session};
use crate::OpcountArgs;

pub fn run(a: &OpcountArgs) -> anyhow::Result<Outcome> {
    let mut s = Session::start("opcount", &a.common)?;
    let arch = s.resolver.value("arch", parse_arch(&a.arch)?, Arch::Lenet5Bn)?;
    let mut prep = s.finish()?;
    let mut csv = prep.csv(&["mode", "layer", "kind", "multiplications", "additions"]);
    let mut summary = Vec::new();
    for (mode, kind) in [("conv", LayerKind::Conv), ("adder", LayerKind::Adder)] {
        let spec = arch.spec(kind)?.with_kind(kind);
        let report = count_ops(&spec)?;
        for l in &report.layers {
            csv.push(vec![
                mode.into(),
                l.index.to_string(),
                l.kind.into(),
                l.multiplications.to_string(),
                l.additions.to_string(),
            ]);
        }
        csv.push(vec![
            mode.into(),
            "total".into(),
            String::new(),
            report.multiplications.to_string(),
            report.additions.to_string(),
        ]);
        let (filters, bn) = spec.param_counts()?;
        summary.push(format!(
            "{mode}: {} multiplications, {} additions; {filters} filter weights + {bn} batch-norm parameters",
            report.multiplications, report.additions
        ));
    }
    prep.write_csv("opcount.csv", &csv)?;
    Ok(prep.outcome(summary))
}
