//! Moderate-deviation tail ratios and the r_x root solver.

use serde::{Deserialize, Serialize};

use crate::error::{MartlabError, Result};
use crate::mc::McContext;
use crate::models::{sample_path, ModelSpec, PastMode};
use crate::report::{ExperimentReport, ReportRow, Rule, POLICY};
use crate::special::{normal_sf, wilson_interval};

/// ν(p) = p + 1 on (2, 3] and 3p − 3 on (3, 4].
pub fn nu(p: f64) -> Result<f64> {
    if p > 2.0 && p <= 3.0 {
        Ok(p + 1.0)
    } else if p > 3.0 && p <= 4.0 {
        Ok(3.0 * p - 3.0)
    } else {
        Err(MartlabError::InvalidArgument(format!("MDP exponent needs p in (2,4], got {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    pub p: f64,
    pub nu: f64,
    /// Zone multiplier a in x ∈ [1, a τ_n].
    pub a_max: f64,
    pub r_grid: Vec<f64>,
}

impl MdpConfig {
    pub fn new(p: f64, a_max: f64, r_grid: Vec<f64>) -> Result<Self> {
        let cfg = Self { p, nu: nu(p)?, a_max, r_grid };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if nu(self.p)? != self.nu {
            return Err(MartlabError::InvalidArgument(format!("nu = {} does not match p = {}", self.nu, self.p)));
        }
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err(MartlabError::InvalidArgument("a_max must be positive".into()));
        }
        if self.r_grid.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || self.r_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MartlabError::InvalidArgument("r grid must be increasing and nonnegative".into()));
        }
        Ok(())
    }

    /// Largest r_x of the zone x ≤ a τ_n with τ_n = n^{p/2 − 1}.
    pub fn zone_r_max(&self, n: usize) -> Result<f64> {
        let tau = (n as f64).powf(self.p / 2.0 - 1.0);
        mdp_r_solver((self.a_max * tau).max(1.0), self.p)
    }
}

fn log_form(r: f64, nu: f64) -> f64 {
    nu * r.ln_1p() + 0.5 * r * r
}

/// Root of ν log(1+r) + r²/2 = log x for r ≥ 0.
pub(crate) fn solve_log_form(log_x: f64, nu: f64) -> f64 {
    if log_x <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, (2.0 * log_x).sqrt());
    let mut r = if nu > 0.0 { (log_x / nu).min(hi) } else { hi };
    r = r.clamp(lo, hi);
    for _ in 0..200 {
        let f = log_form(r, nu) - log_x;
        if f.abs() <= 2e-13 {
            return r;
        }
        if f > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let step = r - f / (nu / (1.0 + r) + r);
        r = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    r
}

/// r_x solving x = (1 + r)^{ν(p)} e^{r²/2}.
pub fn mdp_r_solver(x: f64, p: f64) -> Result<f64> {
    if !(x >= 1.0 && x.is_finite()) {
        return Err(MartlabError::InvalidArgument(format!("r_x needs a finite x >= 1, got {x}")));
    }
    Ok(solve_log_form(x.ln(), nu(p)?))
}

/// Tail ratios P(U ≥ r)/(1 − Φ(r)) and P(U ≤ −r)/Φ(−r) of a sampled statistic,
/// with Wilson 95% intervals. The benchmark ratio is the one of N(0, s²) with
/// s = `benchmark_sd` (1 for the Gaussian limit itself).
pub fn mdp_ratio_curve<F>(
    sampler: F,
    n: u64,
    r_grid: &[f64],
    reps: u64,
    benchmark_sd: f64,
    ctx: &McContext<'_>,
) -> Result<ExperimentReport>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    if reps == 0 {
        return Err(MartlabError::InvalidArgument("need at least one replicate".into()));
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(MartlabError::InvalidArgument("r grid must be nonempty and nonnegative".into()));
    }
    if !(benchmark_sd > 0.0) {
        return Err(MartlabError::InvalidArgument("benchmark sd must be positive".into()));
    }
    let mut u = ctx.exec.try_map(0..reps, sampler)?;
    u.sort_by(f64::total_cmp);
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for &r in r_grid {
        let gauss = normal_sf(r);
        if reps as f64 * gauss < POLICY.tail_count_floor {
            dropped.push(r);
            continue;
        }
        let bench = normal_sf(r / benchmark_sd) / gauss;
        let upper = (u.len() - u.partition_point(|&v| v < r)) as u64;
        let lower = u.partition_point(|&v| v <= -r) as u64;
        for (label, count) in [("upper", upper), ("lower", lower)] {
            let phat = count as f64 / reps as f64;
            let (lo, hi) = wilson_interval(count, reps, POLICY.ci_z);
            let se = (phat * (1.0 - phat) / reps as f64).sqrt() / gauss;
            rows.push(
                ReportRow::new(n, label, phat / gauss, se)
                    .with_param(r)
                    .with_interval(lo / gauss, hi / gauss)
                    .with_benchmark(bench)
                    .with_aux(count as f64, 0.0),
            );
        }
    }
    if !dropped.is_empty() {
        notes.push(format!(
            "warning: r grid truncated, expected tail count below {} at r = {dropped:?}",
            POLICY.tail_count_floor
        ));
    }
    notes.push("ratios tested on the listed r grid only, not over the full moderate-deviation zone".into());
    let rules = vec![
        ("upper_tail_covers_benchmark".to_string(), Rule::CoversBenchmark { series: "upper".into() }),
        ("lower_tail_covers_benchmark".to_string(), Rule::CoversBenchmark { series: "lower".into() }),
    ];
    Ok(ExperimentReport::build("mdp_ratio", ctx.seed, rows, rules, notes))
}

/// Tail-ratio curve of U_n = S_n/(σ√n) from fresh stationary paths. Gaussian
/// models are benchmarked against the exact law N(0, v_n/(σ²n)).
pub fn mdp_experiment(model: &ModelSpec, n: usize, r_grid: &[f64], reps: u64, ctx: &McContext<'_>) -> Result<ExperimentReport> {
    model.validate()?;
    if n == 0 {
        return Err(MartlabError::InvalidArgument("n must be positive".into()));
    }
    let sigma2 = model.sigma2();
    if sigma2 <= 0.0 {
        return Err(MartlabError::DegenerateMarginal("long-run variance is zero".into()));
    }
    let scale = (sigma2 * n as f64).sqrt();
    let sd = if model.is_gaussian() { (model.var_partial_sum(n) / (sigma2 * n as f64)).sqrt() } else { 1.0 };
    let sampler = |rep: u64| -> Result<f64> {
        let path = sample_path(model, n, &PastMode::FreshStationary, ctx.seed, rep)?;
        Ok(path.partial_sum(n) / scale)
    };
    let mut rep = mdp_ratio_curve(sampler, n as u64, r_grid, reps, sd, ctx)?;
    rep.body.notes.push(if model.is_gaussian() {
        format!("benchmark: exact Gaussian law with sd {sd:.12}")
    } else {
        "benchmark: Gaussian limit (ratio 1)".into()
    });
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{Executor, McBudget};
    use crate::models::InnovationLaw;
    use crate::report::Verdict;
    use crate::rng::{CounterStream, Purpose};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    #[test]
    fn nu_branches() {
        assert_eq!(nu(2.5).unwrap(), 3.5);
        assert_eq!(nu(3.0).unwrap(), 4.0);
        assert_eq!(nu(4.0).unwrap(), 9.0);
        assert!(nu(2.0).is_err());
        assert!(nu(4.5).is_err());
    }

    #[test]
    fn solver_examples() {
        assert_eq!(mdp_r_solver(1.0, 3.0).unwrap(), 0.0);
        let x = 2f64.powf(3.5) * 0.5f64.exp();
        assert_relative_eq!(mdp_r_solver(x, 2.5).unwrap(), 1.0, epsilon = 1e-12);
        let r = mdp_r_solver(10.0, 4.0).unwrap();
        assert!((10f64.ln() - 9.0 * r.ln_1p() - 0.5 * r * r).abs() <= 1e-12);
        assert!(mdp_r_solver(0.5, 3.0).is_err());
    }

    #[test]
    fn exact_normal_ratios() {
        let exec = Executor::new(2).unwrap();
        let ctx = McContext::new(&exec, 5, McBudget::default());
        let sampler = |rep: u64| Ok(CounterStream::new(5, Purpose::Aux(1), rep).normal_slot());
        let rep = mdp_ratio_curve(sampler, 1, &[1.0, 2.0], 200_000, 1.0, &ctx).unwrap();
        assert_eq!(rep.rows("upper").len(), 2);
        for r in &rep.body.rows {
            assert!((r.estimate - 1.0).abs() < 5.0 * r.stderr, "{r:?}");
        }
    }

    #[test]
    fn tail_count_floor_truncates() {
        let exec = Executor::serial();
        let ctx = McContext::new(&exec, 5, McBudget::default());
        let sampler = |rep: u64| Ok(CounterStream::new(5, Purpose::Aux(1), rep).normal_slot());
        let rep = mdp_ratio_curve(sampler, 1, &[1.0, 4.0], 10_000, 1.0, &ctx).unwrap();
        assert!(rep.body.rows.iter().all(|r| r.param == Some(1.0)));
        assert!(rep.body.notes[0].starts_with("warning"));
    }

    #[test]
    fn rademacher_sum_matches_binomial_oracle() {
        // S_n = 2 Bin(n, 1/2) − n exactly.
        let n = 1024usize;
        let exec = Executor::new(2).unwrap();
        let ctx = McContext::new(&exec, 8, McBudget::default());
        let model = ModelSpec::iid(InnovationLaw::Rademacher);
        let rep = mdp_experiment(&model, n, &[2.0], 100_000, &ctx).unwrap();
        let row = rep.row("upper", n as u64).unwrap();
        let bin = Binomial::new(0.5, n as u64).unwrap();
        let k = ((2.0 * (n as f64).sqrt() + n as f64) / 2.0).ceil() as u64;
        let exact = (1.0 - bin.cdf(k - 1)) / normal_sf(2.0);
        assert!(row.lower.unwrap() <= exact && exact <= row.upper.unwrap(), "{row:?} vs {exact}");
    }

    #[test]
    fn ar1_tail_ratio_tracks_exact_law() {
        let exec = Executor::new(2).unwrap();
        let ctx = McContext::new(&exec, 12, McBudget::default());
        let model = ModelSpec::ar1(0.5, 1.0);
        let rep = mdp_experiment(&model, 64, &[1.0, 2.0], 100_000, &ctx).unwrap();
        let b = rep.row("upper", 64).unwrap().benchmark.unwrap();
        assert!(b < 1.0);
        assert_eq!(rep.verdict(), Verdict::Pass);
    }

    proptest! {
        #[test]
        fn solver_residual_and_monotonicity(lx in 0.0f64..700.0, dx in 1e-6f64..5.0, p in 2.01f64..4.0) {
            let x = lx.exp();
            let r = mdp_r_solver(x, p).unwrap();
            let v = nu(p).unwrap();
            prop_assert!((lx - v * r.ln_1p() - 0.5 * r * r).abs() <= 1e-12);
            if lx > 0.0 {
                prop_assert!(solve_log_form(lx + dx, v) > r);
                prop_assert!(solve_log_form(lx, v + 0.5) < r);
            }
        }
    }
}
