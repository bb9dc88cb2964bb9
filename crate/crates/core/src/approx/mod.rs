//! Constructive approximation with adder layers: exact two-layer adder
//! realizations of ReLU'd ℓ1-distance sums and of masked linear maps, and the
//! random tent-kernel approximator with Monte Carlo error measurement.

pub mod rbf;
pub mod targets;
pub mod tent;

pub use rbf::{
    emulate_masked_linear, realize_relu_sum, AdderDense, Domain, RbfStyleSum, RbfTerm, TwoLayerAdderRealization,
};
pub use targets::{Target, TargetKind, TARGET_NAMES};
pub use tent::{build_phi_n, c0, psi_eps, tent_r, tent_r_eps, NormEstimates, TentApproximator};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

fn mean_and_stderr(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
    }
}

/// `∫_domain |f − g|` from `samples` uniform points.
pub fn measure_l1_error(
    g: &dyn Fn(&[f64]) -> f64,
    f: &dyn Fn(&[f64]) -> f64,
    domain: &Domain,
    samples: usize,
    rng: &mut RngState,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::invalid("need at least one Monte Carlo sample"));
    }
    let points: Vec<Vec<f64>> = (0..samples).map(|_| domain.sample(rng)).collect();
    Ok(l1_error_at(g, f, domain, &points))
}

fn l1_error_at(g: &dyn Fn(&[f64]) -> f64, f: &dyn Fn(&[f64]) -> f64, domain: &Domain, points: &[Vec<f64>]) -> Estimate {
    let vol = domain.volume();
    let gaps: Vec<f64> = points.iter().map(|x| vol * (f(x) - g(x)).abs()).collect();
    mean_and_stderr(&gaps)
}

fn expand(domain: &Domain, by: f64) -> Domain {
    Domain {
        lo: domain.lo.iter().map(|v| v - by).collect(),
        hi: domain.hi.iter().map(|v| v + by).collect(),
    }
}

/// Max `|A(x) − g(x)|` over `points`.
pub fn realization_residual(real: &TwoLayerAdderRealization, g: &RbfStyleSum, points: &[Vec<f64>]) -> Result<f64> {
    let out = real.eval_batch(points)?;
    let mut worst = 0.0f64;
    for (x, y) in points.iter().zip(out) {
        worst = worst.max((y[0] - g.eval(x)?).abs());
    }
    Ok(worst)
}

/// A random ReLU'd ℓ1 sum with `terms` terms on `[−1, 1]^dim`: centres in
/// the box, coefficients in `[−2, 2]`, offsets in `[−1.5, 0.5]`.
pub fn random_rbf_sum(dim: usize, terms: usize, rng: &mut RngState) -> Result<RbfStyleSum> {
    let box_ = Domain::cube(dim, -1.0, 1.0)?;
    let terms = (0..terms)
        .map(|_| RbfTerm {
            a: rng.uniform(-2.0, 2.0),
            w: box_.sample(rng),
            b: rng.uniform(-1.5, 0.5),
        })
        .collect();
    RbfStyleSum::new(dim, terms)
}

/// Largest residual of the two-layer realization over `instances` random
/// sums, each probed at `probes` uniform points and the box corners.
pub fn relu_sum_check(instances: usize, dim: usize, terms: usize, probes: usize, rng: &mut RngState) -> Result<f64> {
    let domain = Domain::cube(dim, -1.0, 1.0)?;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let g = random_rbf_sum(dim, terms, rng)?;
        let real = realize_relu_sum(&g, &domain)?;
        let mut pts: Vec<Vec<f64>> = (0..probes).map(|_| domain.sample(rng)).collect();
        pts.extend(domain.corners());
        worst = worst.max(realization_residual(&real, &g, &pts)?);
    }
    Ok(worst)
}

/// Largest residual of the masked-linear emulation over `instances` random
/// `(B, A)` pairs with `m` rows on `[−3, 3]^dim`.
pub fn masked_linear_check(instances: usize, m: usize, dim: usize, probes: usize, rng: &mut RngState) -> Result<f64> {
    let domain = Domain::cube(dim, -3.0, 3.0)?;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let mask: Vec<Vec<u8>> = (0..m).map(|_| (0..dim).map(|_| rng.below(2) as u8).collect()).collect();
        let scales: Vec<f64> = (0..m).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let real = emulate_masked_linear(&mask, &scales, &domain)?;
        let mut pts: Vec<Vec<f64>> = (0..probes).map(|_| domain.sample(rng)).collect();
        pts.extend(domain.corners());
        for (x, y) in pts.iter().zip(real.eval_batch(&pts)?) {
            for ((row, a), got) in mask.iter().zip(&scales).zip(y) {
                let want: f64 = a * row.iter().zip(x).map(|(&b, v)| b as f64 * v).sum::<f64>();
                worst = worst.max((got - want).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub epsilon: f64,
    /// mean over seeds of the Monte Carlo L1 error
    pub l1_error: f64,
    /// standard error of that mean, from the spread across seeds
    pub stderr: f64,
}

/// L1 error of `φ_N` against `target` for each `N`, averaged over `seeds`.
/// All `N` and seeds share one set of evaluation points, drawn on the target
/// box widened by `ε` (the support of `φ_N`).
pub fn phi_n_sweep(
    target: &Target,
    epsilon: f64,
    ns: &[usize],
    seeds: &[u64],
    samples: usize,
    quadrature_cells: usize,
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    let f = |x: &[f64]| target.eval(x);
    let domain = target.domain();
    let norms = NormEstimates::estimate(&f, &domain, quadrature_cells, Some(target.sup()));
    let eval_domain = expand(&domain, epsilon);
    let mut eval_rng = RngState::new(0x5eed).fork(samples as u64);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| eval_domain.sample(&mut eval_rng)).collect();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut errs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut rng = RngState::new(seed).fork(n as u64);
            let phi = build_phi_n(&f, &domain, n, epsilon, &mut rng, norms)?;
            errs.push(l1_error_at(&|x| phi.eval(x), &f, &eval_domain, &points).value);
        }
        let e = mean_and_stderr(&errs);
        rows.push(SweepRow {
            n,
            epsilon,
            l1_error: e.value,
            stderr: e.stderr,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectationRow {
    pub probe: Vec<f64>,
    /// mean of `φ_N(probe)` over independent draws
    pub mean: f64,
    pub stderr: f64,
    /// `ψ_ε(probe)` by quadrature
    pub psi: f64,
}

impl ExpectationRow {
    /// `|mean − ψ| / stderr`
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            (self.mean - self.psi).abs() / self.stderr
        } else if self.mean == self.psi {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compares the empirical mean of `φ_N(x₀)` over `draws` independent
/// constructions with `ψ_ε(x₀)` at each probe.
pub fn expectation_check(
    target: &Target,
    epsilon: f64,
    n: usize,
    draws: usize,
    probes: &[Vec<f64>],
    rng: &mut RngState,
) -> Result<Vec<ExpectationRow>> {
    if draws < 2 {
        return Err(Error::invalid("need at least two draws"));
    }
    let f = |x: &[f64]| target.eval(x);
    let domain = target.domain();
    let norms = NormEstimates::estimate(&f, &domain, 400, Some(target.sup()));
    let mut values = vec![Vec::with_capacity(draws); probes.len()];
    for _ in 0..draws {
        let phi = build_phi_n(&f, &domain, n, epsilon, rng, norms)?;
        for (v, p) in values.iter_mut().zip(probes) {
            v.push(phi.eval(p));
        }
    }
    probes
        .iter()
        .zip(values)
        .map(|(p, v)| {
            let e = mean_and_stderr(&v);
            Ok(ExpectationRow {
                probe: p.clone(),
                mean: e.value,
                stderr: e.stderr,
                psi: psi_eps(&f, p, epsilon, 400)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_gap() {
        let dom = Domain::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let mut rng = RngState::new(0);
        let e = measure_l1_error(&|_| 1.5, &|x| x[0] * 0.0, &dom, 100, &mut rng).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
        assert_eq!(e.stderr, 0.0);
        let same = measure_l1_error(&|x| x[0], &|x| x[0], &dom, 100, &mut rng).unwrap();
        assert_eq!(same.value, 0.0);
    }

    #[test]
    fn linear_gap_within_three_stderr() {
        // ∫_0^1 |x| dx = 1/2
        let dom = Domain::new(vec![0.0], vec![1.0]).unwrap();
        let mut rng = RngState::new(1);
        let e = measure_l1_error(&|x| x[0], &|_| 0.0, &dom, 10_000, &mut rng).unwrap();
        assert!((e.value - 0.5).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn small_construction_checks() {
        let mut rng = RngState::new(2);
        assert!(relu_sum_check(3, 2, 4, 200, &mut rng).unwrap() < 1e-9);
        assert!(masked_linear_check(3, 3, 4, 200, &mut rng).unwrap() < 1e-9);
    }

    #[test]
    fn phi_n_expands_exactly_into_relu_sum() {
        let t = Target::new("sine", 2).unwrap();
        let f = |x: &[f64]| t.eval(x);
        let dom = t.domain();
        let norms = NormEstimates::estimate(&f, &dom, 200, Some(1.0));
        let mut rng = RngState::new(3);
        let phi = build_phi_n(&f, &dom, 8, 0.3, &mut rng, norms).unwrap();
        let g = phi.to_rbf_sum();
        let real = realize_relu_sum(&g, &expand(&dom, 0.3)).unwrap();
        for _ in 0..200 {
            let x = dom.sample(&mut rng);
            let want = phi.eval(&x);
            assert!((g.eval(&x).unwrap() - want).abs() < 1e-9);
            assert!((real.eval(&x).unwrap()[0] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn nonnegative_target_gives_one_sign() {
        let t = Target::new("gaussian", 2).unwrap();
        let f = |x: &[f64]| t.eval(x);
        let norms = NormEstimates::estimate(&f, &t.domain(), 100, Some(1.0));
        let mut rng = RngState::new(4);
        let phi = build_phi_n(&f, &t.domain(), 50, 0.2, &mut rng, norms).unwrap();
        assert!(phi.signs.iter().all(|&s| s == 1.0));
    }
}
