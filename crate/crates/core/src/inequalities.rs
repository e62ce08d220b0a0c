//! Maximal inequalities: dyadic chaining, the conditional Doob bound and the
//! ergodic theorem with rate, checked along trajectories.

use serde::{Deserialize, Serialize};

use crate::conditions::{gate_mw1, Psi};
use crate::error::{MartlabError, Result};
use crate::experiment::check_grid;
use crate::mc::{McContext, MeanEstimate};
use crate::models::{sample_path, ModelSpec, PastMode, PastState, PathHistory, PathSample};
use crate::projective::{cond_exp_s, linear_kernel};
use crate::report::{ExperimentReport, Field, ReportRow, Rule, POLICY};
use crate::special::CompensatedSum;

/// Both sides of max_{n≤2^r} |s_n| ≤ Σ_{k=0}^{r} (Σ_m |s_{2^k m} − s_{2^k(m−1)}|^p)^{1/p}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainBound {
    pub lhs: f64,
    pub rhs: f64,
}

/// `s[i]` holds s_{i+1}; s_0 = 0.
pub fn dyadic_chain_bound(s: &[f64], p: f64) -> Result<ChainBound> {
    if s.is_empty() || !s.len().is_power_of_two() {
        return Err(MartlabError::InvalidArgument(format!("sequence length {} is not a power of two", s.len())));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(MartlabError::InvalidArgument(format!("p must be a finite value >= 1, got {p}")));
    }
    let r = s.len().trailing_zeros();
    let at = |i: usize| if i == 0 { 0.0 } else { s[i - 1] };
    let lhs = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut rhs = CompensatedSum::default();
    for k in 0..=r {
        let step = 1usize << k;
        let shell = (1..=s.len() >> k).map(|m| (at(step * m) - at(step * (m - 1))).abs());
        let norm = if p == 1.0 {
            shell.sum::<f64>()
        } else {
            // Scale by the largest increment to keep |·|^p in range.
            let inc: Vec<f64> = shell.collect();
            let top = inc.iter().copied().fold(0.0, f64::max);
            if top == 0.0 {
                0.0
            } else {
                top * inc.iter().map(|d| (d / top).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        };
        rhs.add(norm);
    }
    Ok(ChainBound { lhs, rhs: rhs.value() })
}

/// Conditional Doob bound at a fixed past, with delta-method standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoobCheck {
    pub r: u32,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// E_0 S²_{2^r}.
    pub terminal_second_moment: f64,
    /// Σ_k E_0 (E_{k2^l}(S_{(k+1)2^l}) − S_{k2^l})² for l = 0..r−1.
    pub chain_terms: Vec<f64>,
    pub holds_within_ci: bool,
}

/// E_j(S_{j+m} − S_j) along a simulated path.
struct CondIncrement<'a> {
    model: &'a ModelSpec,
    kernels: Vec<Vec<f64>>,
}

impl<'a> CondIncrement<'a> {
    fn new(model: &'a ModelSpec, r: u32) -> Self {
        let kernels = match model.filter() {
            Some((coeffs, _)) => (0..r).map(|l| linear_kernel(coeffs, 1 << l, 0)).collect(),
            None => Vec::new(),
        };
        Self { model, kernels }
    }

    fn eval(&self, path: &PathSample, j: usize, l: u32) -> Result<f64> {
        match &path.history {
            PathHistory::Innovations { first_time, eps } => {
                let top = (j as i64 - first_time) as usize;
                let kernel = &self.kernels[l as usize];
                Ok(kernel.iter().enumerate().map(|(m, b)| b * eps[top - m]).sum())
            }
            _ => cond_exp_s(self.model, 1 << l, &path.past_at(j), 0),
        }
    }
}

/// (E_0 max_{i≤2^r} S_i²)^{1/2} against 2(E_0 S²_{2^r})^{1/2} + 2Σ_l (Σ_k Q^{k2^l}(E_0 S_{2^l})²)^{1/2},
/// by conditional Monte Carlo given `past`.
pub fn quenched_doob_bound(model: &ModelSpec, past: &PastState, r: u32, reps: u64, ctx: &McContext<'_>) -> Result<DoobCheck> {
    model.validate()?;
    past.check_for(model)?;
    if r == 0 || r > 20 {
        return Err(MartlabError::InvalidArgument(format!("r must lie in 1..=20, got {r}")));
    }
    if reps < 2 {
        return Err(MartlabError::InvalidArgument("need at least 2 replicates".into()));
    }
    let n = 1usize << r;
    let dim = 2 + r as usize;
    let inc = CondIncrement::new(model, r);
    let mode = PastMode::Fixed(past.clone());
    let samples = ctx.exec.try_map(0..reps, |rep| {
        let path = sample_path(model, n, &mode, ctx.seed, rep)?;
        let mut out = vec![0.0; dim];
        out[0] = path.partial_sums.iter().fold(0.0f64, |m, s| m.max(s * s));
        out[1] = path.partial_sum(n).powi(2);
        for l in 0..r {
            let block = 1usize << l;
            let mut acc = 0.0;
            for k in 1..(n >> l) {
                acc += inc.eval(&path, k * block, l)?.powi(2);
            }
            out[2 + l as usize] = acc;
        }
        Ok(out)
    })?;
    let cols: Vec<MeanEstimate> =
        (0..dim).map(|c| MeanEstimate::from_samples(&samples.iter().map(|v| v[c]).collect::<Vec<_>>())).collect();
    let means: Vec<f64> = cols.iter().map(|c| c.mean).collect();

    let lhs = means[0].sqrt();
    let lhs_stderr = if lhs > 0.0 { cols[0].stderr / (2.0 * lhs) } else { 0.0 };

    // Gradient of the right side in the means of (S², chain_0, ..., chain_{r−1}).
    let mut grad = vec![0.0; dim];
    let mut rhs = 0.0;
    for c in 1..dim {
        if means[c] > 0.0 {
            let root = means[c].sqrt();
            rhs += 2.0 * root;
            grad[c] = 1.0 / root;
        }
    }
    let mut var = 0.0;
    for a in 1..dim {
        for b in 1..dim {
            if grad[a] != 0.0 && grad[b] != 0.0 {
                var += grad[a] * grad[b] * covariance(&samples, a, b, &means);
            }
        }
    }
    let rhs_stderr = (var.max(0.0) / reps as f64).sqrt();
    let z = POLICY.ci_z;
    let holds = lhs + z * lhs_stderr <= (rhs - z * rhs_stderr) * POLICY.inequality_slack;
    Ok(DoobCheck {
        r,
        lhs,
        lhs_stderr,
        rhs,
        rhs_stderr,
        terminal_second_moment: means[1],
        chain_terms: means[2..].to_vec(),
        holds_within_ci: holds,
    })
}

fn covariance(samples: &[Vec<f64>], a: usize, b: usize, means: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in samples {
        acc.add((v[a] - means[a]) * (v[b] - means[b]));
    }
    acc.value() / (samples.len() as f64 - 1.0)
}

/// Report wrapper for [`quenched_doob_bound`] over several dyadic horizons.
pub fn doob_experiment(model: &ModelSpec, past: &PastState, r_values: &[u32], reps: u64, ctx: &McContext<'_>) -> Result<ExperimentReport> {
    if r_values.is_empty() {
        return Err(MartlabError::InvalidArgument("no horizons".into()));
    }
    let mut rows = Vec::new();
    let z = POLICY.ci_z;
    for &r in r_values {
        let c = quenched_doob_bound(model, past, r, reps, ctx)?;
        let n = 1u64 << r;
        rows.push(
            ReportRow::new(n, "doob", c.lhs, c.lhs_stderr)
                .with_interval(c.lhs - z * c.lhs_stderr, c.lhs + z * c.lhs_stderr)
                .with_aux(c.rhs, c.rhs_stderr)
                .with_flag(c.holds_within_ci),
        );
    }
    let rules = vec![("doob_holds_within_ci".to_string(), Rule::AllFlagged { series: "doob".into() })];
    let notes = vec![format!("past: {}", serde_json::to_string(past)?), format!("conditional replicates: {reps}")];
    Ok(ExperimentReport::build("quenched_doob", ctx.seed, rows, rules, notes))
}

/// |S_n|/(ψ(n) n^{1/p}) along `paths` trajectories of length max(grid).
///
/// Rows: `normalized` (mean over paths at grid n) and `tail_sup` (mean over
/// paths of the sup of the normalized sequence over [n, max(grid)]).
pub fn ergodic_rate_experiment(
    model: &ModelSpec,
    p: f64,
    psi: Psi,
    n_grid: &[usize],
    paths: u64,
    ctx: &McContext<'_>,
) -> Result<ExperimentReport> {
    model.validate()?;
    psi.validate()?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(MartlabError::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    if paths < 2 {
        return Err(MartlabError::InvalidArgument("need at least 2 paths".into()));
    }
    let grid = check_grid(n_grid)?;
    let n_max = *grid.last().unwrap();
    let mut notes = gate_mw1(model, p, psi, n_max, ctx)?;
    let norm = |m: usize| psi.eval(m as f64) * (m as f64).powf(1.0 / p);
    let per_path = ctx.exec.try_map(0..paths, |rep| {
        let path = sample_path(model, n_max, &PastMode::FreshStationary, ctx.seed, rep)?;
        let u: Vec<f64> = (1..=n_max).map(|m| path.partial_sum(m).abs() / norm(m)).collect();
        let mut tail = vec![0.0f64; n_max + 1];
        for m in (1..=n_max).rev() {
            tail[m - 1] = tail[m].max(u[m - 1]);
        }
        Ok(grid.iter().flat_map(|&n| [u[n - 1], tail[n - 1]]).collect::<Vec<f64>>())
    })?;
    let mut rows = Vec::new();
    for (g, &n) in grid.iter().enumerate() {
        let a = MeanEstimate::from_samples(&per_path.iter().map(|v| v[2 * g]).collect::<Vec<_>>());
        let b = MeanEstimate::from_samples(&per_path.iter().map(|v| v[2 * g + 1]).collect::<Vec<_>>());
        rows.push(ReportRow::new(n as u64, "normalized", a.mean, a.stderr));
        rows.push(ReportRow::new(n as u64, "tail_sup", b.mean, b.stderr));
    }
    notes.push(format!("psi = {}, p = {p}, paths = {paths}", psi.label()));
    let rules = vec![(
        "normalized_decays".to_string(),
        Rule::TopBelowBottom { series: "normalized".into(), field: Field::Estimate },
    )];
    Ok(ExperimentReport::build("ergodic_rate", ctx.seed, rows, rules, notes))
}
