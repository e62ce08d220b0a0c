//! Quenched experiments: functionals of S_{[nt]}/√n and the remainder
//! max_{k≤n}(S_k − M_k)²/n, conditionally on a fixed past.

use serde::{Deserialize, Serialize};

use crate::approx::{d_form, decompose_with, TruncationParams};
use crate::conditions::gate_mw;
use crate::error::{MartlabError, Result};
use crate::experiment::check_grid;
use crate::mc::{McContext, MeanEstimate};
use crate::models::{sample_path, ModelSpec, PastMode, PastState, PathSample};
use crate::report::{ExperimentReport, Field, ReportRow, Rule, POLICY};
use crate::rng::{CounterStream, Purpose};
use crate::special::{normal_pdf, normal_sf};

/// Steps of the random-walk oracle for Brownian functionals.
pub const ORACLE_STEPS: usize = 1 << 14;

/// Bounded continuous path functionals, each clipped to [−c, c].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFunctional {
    /// x(1)
    ClippedTerminal,
    /// sup_{t≤1} x(t)
    ClippedRunningMax,
    /// ∫_0^1 x(t) dt
    ClippedTimeAverage,
}

impl PathFunctional {
    pub const ALL: [PathFunctional; 3] =
        [PathFunctional::ClippedTerminal, PathFunctional::ClippedRunningMax, PathFunctional::ClippedTimeAverage];

    pub fn as_str(&self) -> &'static str {
        match self {
            PathFunctional::ClippedTerminal => "clipped_terminal",
            PathFunctional::ClippedRunningMax => "clipped_running_max",
            PathFunctional::ClippedTimeAverage => "clipped_time_average",
        }
    }

    /// f applied to the step path x_k = s_k / scale, k = 0..=n, s_0 = 0.
    pub fn eval(&self, partial_sums: &[f64], scale: f64, clip: f64) -> f64 {
        let n = partial_sums.len() - 1;
        let raw = match self {
            PathFunctional::ClippedTerminal => partial_sums[n] / scale,
            PathFunctional::ClippedRunningMax => partial_sums.iter().fold(0.0f64, |m, s| m.max(*s)) / scale,
            // S_{[nt]} is S_k on [k/n, (k+1)/n), so the integral sums S_0..S_{n−1}.
            PathFunctional::ClippedTimeAverage => partial_sums[..n].iter().sum::<f64>() / (n as f64 * scale),
        };
        raw.clamp(-clip, clip)
    }

    /// E f(σW) in closed form.
    pub fn brownian_benchmark(&self, sigma: f64, clip: f64) -> f64 {
        match self {
            PathFunctional::ClippedTerminal | PathFunctional::ClippedTimeAverage => 0.0,
            // sup W has the law of |Z|: E min(σ|Z|, c) = 2c Φ̄(c/σ) + 2σ(φ(0) − φ(c/σ)).
            PathFunctional::ClippedRunningMax => {
                if sigma == 0.0 {
                    0.0
                } else {
                    let u = clip / sigma;
                    2.0 * clip * normal_sf(u) + 2.0 * sigma * (normal_pdf(0.0) - normal_pdf(u))
                }
            }
        }
    }
}

/// E f(σW) from `reps` Gaussian random walks with [`ORACLE_STEPS`] steps.
pub fn brownian_oracle(f: PathFunctional, sigma: f64, clip: f64, reps: u64, ctx: &McContext<'_>) -> MeanEstimate {
    let m = ORACLE_STEPS;
    let scale = (m as f64).sqrt();
    let vals = ctx.exec.map(0..reps, |rep| {
        let mut s = CounterStream::new(ctx.seed, Purpose::Aux(20), rep);
        let mut acc = 0.0;
        let sums: Vec<f64> = (0..m)
            .map(|_| {
                acc += sigma * s.normal_slot();
                acc
            })
            .collect();
        f.eval(&with_origin(&sums), scale, clip)
    });
    MeanEstimate::from_samples(&vals)
}

fn with_origin(sums: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(sums.len() + 1);
    v.push(0.0);
    v.extend_from_slice(sums);
    v
}

/// η = σ², valid because every catalog model is ergodic; torus steps must be irrational.
pub fn ergodic_eta(model: &ModelSpec) -> Result<f64> {
    model.validate()?;
    if let ModelSpec::TorusWalk { step, .. } = model {
        for q in 1..=10_000u32 {
            let x = step * q as f64;
            if (x - x.round()).abs() < 1e-9 {
                return Err(MartlabError::NotApplicable(format!(
                    "torus step {step} is (numerically) rational with denominator {q}; the walk is not ergodic"
                )));
            }
        }
    }
    Ok(model.sigma2())
}

/// E_0 f(S_{[n·]}/√n) given the past mode.
pub fn functional_mean(
    model: &ModelSpec,
    mode: &PastMode,
    n: usize,
    reps: u64,
    f: PathFunctional,
    clip: f64,
    ctx: &McContext<'_>,
) -> Result<MeanEstimate> {
    let vals = ctx.exec.try_map(0..reps, |rep| {
        let path = sample_path(model, n, mode, ctx.seed, rep)?;
        Ok(f.eval(&with_origin(&path.partial_sums), (n as f64).sqrt(), clip))
    })?;
    Ok(MeanEstimate::from_samples(&vals))
}

fn check_clip(clip: f64) -> Result<()> {
    if !(clip > 0.0 && clip.is_finite()) {
        return Err(MartlabError::InvalidArgument(format!("clip level must be positive, got {clip}")));
    }
    Ok(())
}

/// Quenched estimates of E_0 f(S_{[n·]}/√n) against E f(√η W) at each n.
///
/// One row per (functional, n): estimate, combined stderr, benchmark and the
/// absolute gap in `aux`. Each functional gets a rule requiring every gap to
/// lie within `gap_sigmas` combined stderr.
pub fn quenched_fclt(
    model: &ModelSpec,
    past: &PastState,
    n_grid: &[usize],
    reps: u64,
    functionals: &[PathFunctional],
    clip: f64,
    ctx: &McContext<'_>,
) -> Result<ExperimentReport> {
    model.validate()?;
    past.check_for(model)?;
    check_clip(clip)?;
    if functionals.is_empty() {
        return Err(MartlabError::InvalidArgument("no functionals requested".into()));
    }
    if reps < 2 {
        return Err(MartlabError::InvalidArgument("need at least 2 replicates".into()));
    }
    let grid = check_grid(n_grid)?;
    let n_max = *grid.last().unwrap();
    let mut notes = gate_mw(model, n_max, ctx)?;
    let eta = ergodic_eta(model)?;
    let sigma = eta.sqrt();
    notes.push(format!("eta = sigma^2 = {eta:.12e} (ergodic model)"));
    notes.push(format!("past: {}", serde_json::to_string(past)?));
    notes.push(format!("clip c = {clip}, conditional replicates = {reps}"));
    let mode = PastMode::Fixed(past.clone());
    let mut rows = Vec::new();
    for &n in &grid {
        let vals = ctx.exec.try_map(0..reps, |rep| {
            let path = sample_path(model, n, &mode, ctx.seed, rep)?;
            let s = with_origin(&path.partial_sums);
            Ok(functionals.iter().map(|f| f.eval(&s, (n as f64).sqrt(), clip)).collect::<Vec<f64>>())
        })?;
        for (i, f) in functionals.iter().enumerate() {
            let m = MeanEstimate::from_samples(&vals.iter().map(|v| v[i]).collect::<Vec<_>>());
            let bench = f.brownian_benchmark(sigma, clip);
            let gap = (m.mean - bench).abs();
            let z = POLICY.ci_z;
            rows.push(
                ReportRow::new(n as u64, f.as_str(), m.mean, m.stderr)
                    .with_benchmark(bench)
                    .with_interval(m.mean - z * m.stderr, m.mean + z * m.stderr)
                    .with_aux(gap, m.stderr),
            );
        }
    }
    let rules = functionals
        .iter()
        .map(|f| {
            (format!("{}_gap_within_ci", f.as_str()), Rule::GapWithin { series: f.as_str().into(), sigmas: POLICY.gap_sigmas })
        })
        .collect();
    Ok(ExperimentReport::build("quenched_fclt", ctx.seed, rows, rules, notes))
}

/// max_{k≤n}(S_k − M_k)²/n for every grid n along one conditional path.
fn remainder_profile(model: &ModelSpec, path: &PathSample, trunc: &TruncationParams, form: &crate::approx::DForm, grid: &[usize]) -> Result<Vec<f64>> {
    let dec = decompose_with(model, path, trunc, form)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut run = 0.0f64;
    let mut gi = 0;
    for (k, r) in dec.r.iter().enumerate() {
        run = run.max(r * r);
        if gi < grid.len() && k + 1 == grid[gi] {
            out.push(run / grid[gi] as f64);
            gi += 1;
        }
    }
    Ok(out)
}

/// E_0(max_{k≤n}(S_k − M_k)²)/n on a grid, conditionally on `past`.
pub fn resquen_decay(
    model: &ModelSpec,
    past: &PastState,
    n_grid: &[usize],
    reps: u64,
    trunc: Option<TruncationParams>,
    ctx: &McContext<'_>,
) -> Result<ExperimentReport> {
    model.validate()?;
    past.check_for(model)?;
    if reps < 2 {
        return Err(MartlabError::InvalidArgument("need at least 2 replicates".into()));
    }
    let grid = check_grid(n_grid)?;
    let n_max = *grid.last().unwrap();
    let mut notes = gate_mw(model, n_max, ctx)?;
    ergodic_eta(model)?;
    let trunc = match trunc {
        Some(t) => {
            t.validate()?;
            t
        }
        None => TruncationParams::default_for(model, n_max, 2.0)?,
    };
    let form = d_form(model, &trunc)?;
    let mode = PastMode::Fixed(past.clone());
    let per_rep = ctx.exec.try_map(0..reps, |rep| {
        let path = sample_path(model, n_max, &mode, ctx.seed, rep)?;
        remainder_profile(model, &path, &trunc, &form, &grid)
    })?;
    let mut rows = Vec::new();
    for (g, &n) in grid.iter().enumerate() {
        let m = MeanEstimate::from_samples(&per_rep.iter().map(|v| v[g]).collect::<Vec<_>>());
        rows.push(ReportRow::new(n as u64, "resquen", m.mean, m.stderr));
    }
    notes.push(format!("construction {}", trunc.label()));
    notes.push(format!("past: {}", serde_json::to_string(past)?));
    notes.push(format!("conditional replicates = {reps}"));
    let rules = vec![(
        "resquen_decays".to_string(),
        Rule::LastBelowFraction {
            series: "resquen".into(),
            field: Field::Estimate,
            fraction: POLICY.decay_fraction,
            floor: POLICY.decay_floor,
        },
    )];
    Ok(ExperimentReport::build("resquen_decay", ctx.seed, rows, rules, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::dyadic_grid;
    use crate::mc::{Executor, McBudget};
    use crate::models::{draw_stationary_past, golden_step, Complex, InnovationLaw};
    use crate::report::Verdict;
    use approx::assert_relative_eq;

    fn ctx_with(exec: &Executor, seed: u64) -> McContext<'_> {
        McContext::new(exec, seed, McBudget::default())
    }

    #[test]
    fn functional_evaluation() {
        let s = [0.0, 1.0, 3.0, 2.0, -4.0];
        assert_eq!(PathFunctional::ClippedTerminal.eval(&s, 2.0, 10.0), -2.0);
        assert_eq!(PathFunctional::ClippedTerminal.eval(&s, 2.0, 1.0), -1.0);
        assert_eq!(PathFunctional::ClippedRunningMax.eval(&s, 1.0, 10.0), 3.0);
        assert_eq!(PathFunctional::ClippedTimeAverage.eval(&s, 1.0, 10.0), 6.0 / 4.0);
        assert_eq!(PathFunctional::ClippedRunningMax.eval(&[0.0, -1.0], 1.0, 10.0), 0.0);
    }

    #[test]
    fn benchmarks_match_random_walk_oracle() {
        let exec = Executor::serial();
        let ctx = ctx_with(&exec, 77);
        for f in PathFunctional::ALL {
            let o = brownian_oracle(f, 1.3, 1.0, 2000, &ctx);
            let b = f.brownian_benchmark(1.3, 1.0);
            // The discrete max sits below the continuous one by O(σ/√m).
            let bias = if f == PathFunctional::ClippedRunningMax { 0.6 * 1.3 / (ORACLE_STEPS as f64).sqrt() } else { 0.0 };
            assert!((o.mean - b).abs() < 4.0 * o.stderr + bias, "{f:?}: {} vs {b}", o.mean);
        }
        // No clipping: E σ|Z| = σ√(2/π).
        assert_relative_eq!(
            PathFunctional::ClippedRunningMax.brownian_benchmark(2.0, 1e6),
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn iid_quenched_is_exact_gaussian() {
        let exec = Executor::serial();
        let model = ModelSpec::iid(InnovationLaw::StandardNormal);
        let past = PastState::Innovations { window: vec![5.0] };
        let exact = [PathFunctional::ClippedTerminal, PathFunctional::ClippedTimeAverage];
        let rep = quenched_fclt(&model, &past, &[64, 256, 1024], 4000, &exact, 1.0, &ctx_with(&exec, 3)).unwrap();
        assert_eq!(rep.verdict(), Verdict::Pass, "{:?}", rep.body.checks);
        // The discrete maximum converges at rate n^{-1/2}.
        let rep = quenched_fclt(&model, &past, &[16, 1024], 4000, &[PathFunctional::ClippedRunningMax], 1.0, &ctx_with(&exec, 3))
            .unwrap();
        let gaps: Vec<f64> = rep.rows("clipped_running_max").iter().map(|r| r.aux.unwrap()).collect();
        assert!(gaps[1] < 0.3 * gaps[0], "{gaps:?}");
    }

    #[test]
    fn iid_independent_of_past() {
        let exec = Executor::serial();
        let model = ModelSpec::iid(InnovationLaw::CenteredExponential { rate: 1.0 });
        let ctx = ctx_with(&exec, 8);
        let f = PathFunctional::ClippedRunningMax;
        let a = functional_mean(&model, &PastMode::Fixed(PastState::Innovations { window: vec![3.0] }), 128, 4000, f, 1.5, &ctx)
            .unwrap();
        let b = functional_mean(&model, &PastMode::Fixed(PastState::Innovations { window: vec![-0.9] }), 128, 4000, f, 1.5, &ctx.reseeded(1))
            .unwrap();
        assert!((a.mean - b.mean).abs() < 4.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
    }

    #[test]
    fn quenched_average_matches_annealed() {
        let exec = Executor::serial();
        let model = ModelSpec::ar1(0.5, 1.0);
        let ctx = ctx_with(&exec, 12);
        let f = PathFunctional::ClippedTerminal;
        let pasts = 200u64;
        let per_past = 20u64;
        let mut means = Vec::new();
        for j in 0..pasts {
            let past = draw_stationary_past(&model, ctx.seed ^ 0xabc, j).unwrap();
            let c = ctx.reseeded(j + 1);
            means.push(functional_mean(&model, &PastMode::Fixed(past), 256, per_past, f, 1.5, &c).unwrap().mean);
        }
        let q = MeanEstimate::from_samples(&means);
        let a = functional_mean(&model, &PastMode::FreshStationary, 256, 4000, f, 1.5, &ctx).unwrap();
        assert!((q.mean - a.mean).abs() < 4.0 * (q.stderr.powi(2) + a.stderr.powi(2)).sqrt(), "{q:?} {a:?}");
    }

    #[test]
    fn ar1_far_start_gap_shrinks() {
        let exec = Executor::serial();
        let model = ModelSpec::ar1(0.5, 1.0);
        let past = PastState::Ar1 { x0: 3.0, eps0: None };
        let rep = quenched_fclt(&model, &past, &dyadic_grid(4, 10), 4000, &[PathFunctional::ClippedTerminal], 2.0, &ctx_with(&exec, 4))
            .unwrap();
        let gaps: Vec<f64> = rep.rows("clipped_terminal").iter().map(|r| r.aux.unwrap()).collect();
        assert!(gaps[gaps.len() - 1] < 0.5 * gaps[0], "{gaps:?}");
    }

    #[test]
    fn torus_running_max_report() {
        let exec = Executor::serial();
        let model = ModelSpec::torus(vec![Complex::new(0.5, 0.0), Complex::new(0.0, 0.25)]);
        let past = PastState::Torus { xi_prev: golden_step(), xi0: 0.0 };
        let rep = quenched_fclt(&model, &past, &[256], 2000, &[PathFunctional::ClippedRunningMax], 1.0, &ctx_with(&exec, 5)).unwrap();
        let row = &rep.rows("clipped_running_max")[0];
        assert!(row.benchmark.unwrap() > 0.0 && row.estimate > 0.0);
        assert!(ergodic_eta(&ModelSpec::TorusWalk { step: 0.25, fourier: vec![Complex::new(0.5, 0.0)] }).is_err());
    }

    #[test]
    fn resquen_iid_zero_and_ar1_decays() {
        let exec = Executor::serial();
        let model = ModelSpec::iid(InnovationLaw::Rademacher);
        let rep = resquen_decay(&model, &PastState::Innovations { window: vec![1.0] }, &dyadic_grid(4, 10), 200, None, &ctx_with(&exec, 1))
            .unwrap();
        assert!(rep.rows("resquen").iter().all(|r| r.estimate == 0.0));
        assert_eq!(rep.verdict(), Verdict::Pass);

        let rep = resquen_decay(&ModelSpec::ar1(0.5, 1.0), &PastState::Ar1 { x0: 1.0, eps0: None }, &dyadic_grid(6, 12), 1000, None, &ctx_with(&exec, 2))
            .unwrap();
        assert_eq!(rep.verdict(), Verdict::Pass, "{:?}", rep.body.checks);
        let v: Vec<f64> = rep.rows("resquen").iter().map(|r| r.estimate).collect();
        assert!(v.iter().all(|x| *x >= 0.0));
        assert!(v[v.len() - 1] < 0.25 * v[0]);
    }

    #[test]
    fn resquen_shrinks_with_truncation() {
        let exec = Executor::serial();
        let model = ModelSpec::linear_from_fn(256, InnovationLaw::StandardNormal, |k| ((k + 1) as f64).powi(-3));
        let past = PastState::Innovations { window: vec![0.5; 257] };
        let grid = dyadic_grid(4, 8);
        let ctx = ctx_with(&exec, 3);
        let mut prev = f64::INFINITY;
        let mut first = 0.0;
        for (n_outer, k_lag) in [(1, 1), (4, 8), (32, 64), (256, 256)] {
            let t = TruncationParams::new(n_outer, k_lag).unwrap();
            let rep = resquen_decay(&model, &past, &grid, 400, Some(t), &ctx).unwrap();
            let last = rep.rows("resquen").last().unwrap().estimate;
            assert!(last <= prev * 1.01, "N={n_outer}: {last} > {prev}");
            if n_outer == 1 {
                first = last;
            }
            prev = last;
        }
        assert!(prev < 0.5 * first);
        let rep = resquen_decay(&model, &past, &grid, 400, None, &ctx).unwrap();
        assert_eq!(rep.verdict(), Verdict::Pass, "{:?}", rep.body.checks);
    }
}
