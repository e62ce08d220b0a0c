//! One-dimensional Wasserstein distances via the quantile coupling.

use std::borrow::Cow;

use crate::error::{MartlabError, Result};
use crate::experiment::check_grid;
use crate::mc::{McContext, MeanEstimate};
use crate::models::{ModelSpec, PastMode};
use crate::report::{ExperimentReport, Field, ReportRow, Rule, POLICY};
use crate::rng::{CounterStream, Purpose};
use crate::special::{gaussian_abs_moment_norm, normal_quantile, CompensatedSum};

use super::partial_sums_on_grid;

#[derive(Debug, Clone, Copy)]
pub enum WassersteinTarget<'a> {
    /// The centered Gaussian law with the given variance.
    GaussianSigma2(f64),
    /// Another sample of the same size.
    Empirical(&'a [f64]),
}

/// Standard normal quantiles at (i − ½)/n.
#[derive(Debug, Clone)]
pub struct GaussianNodes {
    z: Vec<f64>,
}

impl GaussianNodes {
    pub fn new(n: usize) -> Self {
        let nf = n as f64;
        Self { z: (0..n).map(|i| normal_quantile((i as f64 + 0.5) / nf)).collect() }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

fn sorted(x: &[f64]) -> Cow<'_, [f64]> {
    if x.windows(2).all(|w| w[0] <= w[1]) {
        Cow::Borrowed(x)
    } else {
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        Cow::Owned(v)
    }
}

fn check_order(r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(MartlabError::InvalidArgument(format!("Wasserstein order must be a finite r >= 1, got {r}")));
    }
    Ok(())
}

fn coupled_distance(x: &[f64], y: impl Iterator<Item = f64>, r: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for (a, b) in x.iter().zip(y) {
        let d = (a - b).abs();
        acc.add(if r == 1.0 { d } else if r == 2.0 { d * d } else { d.powf(r) });
    }
    (acc.value() / x.len() as f64).powf(1.0 / r)
}

/// W_r between the empirical law of `sample` and `target`. Unsorted input is
/// sorted internally.
pub fn wasserstein_r(sample: &[f64], target: WassersteinTarget<'_>, r: f64) -> Result<f64> {
    check_order(r)?;
    if sample.is_empty() {
        return Err(MartlabError::EmptySample);
    }
    let xs = sorted(sample);
    match target {
        WassersteinTarget::GaussianSigma2(s2) => {
            if !(s2 >= 0.0 && s2.is_finite()) {
                return Err(MartlabError::InvalidArgument(format!("target variance must be >= 0, got {s2}")));
            }
            let nodes = GaussianNodes::new(xs.len());
            Ok(wasserstein_gaussian_sorted(&xs, &nodes, s2.sqrt(), r))
        }
        WassersteinTarget::Empirical(t) => {
            if t.len() != xs.len() {
                return Err(MartlabError::SizeMismatch { left: xs.len(), right: t.len() });
            }
            let ys = sorted(t);
            Ok(coupled_distance(&xs, ys.iter().copied(), r))
        }
    }
}

/// W_r of a sorted sample against N(0, σ²) using precomputed nodes.
pub(crate) fn wasserstein_gaussian_sorted(xs: &[f64], nodes: &GaussianNodes, sigma: f64, r: f64) -> f64 {
    debug_assert_eq!(xs.len(), nodes.len());
    coupled_distance(xs, nodes.z.iter().map(|z| sigma * z), r)
}

/// W_r(N(0, s²), N(0, σ²)) = |s − σ|·‖Z‖_r.
pub fn wasserstein_gaussian_closed_form(s: f64, sigma: f64, r: f64) -> f64 {
    (s - sigma).abs() * gaussian_abs_moment_norm(r)
}

/// Mean and spread of W_r between `size` fresh N(0, σ²) draws and N(0, σ²),
/// over `draws` independent samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorBand {
    pub mean: f64,
    pub sd: f64,
    pub draws: usize,
}

impl FloorBand {
    pub fn upper(&self) -> f64 {
        self.mean + POLICY.floor_band_sigmas * self.sd
    }
}

pub fn sampling_floor(
    size: usize,
    sigma: f64,
    r: f64,
    draws: usize,
    ctx: &McContext<'_>,
    nodes: &GaussianNodes,
) -> Result<FloorBand> {
    check_order(r)?;
    if size == 0 || draws < 2 {
        return Err(MartlabError::InvalidArgument("floor needs a nonempty sample and at least two draws".into()));
    }
    if nodes.len() != size {
        return Err(MartlabError::SizeMismatch { left: nodes.len(), right: size });
    }
    let w = ctx.exec.map(0..draws as u64, |j| {
        let mut s = CounterStream::new(ctx.seed, Purpose::GaussianFloor, j);
        let mut x: Vec<f64> = (0..size).map(|_| sigma * s.normal_slot()).collect();
        x.sort_by(f64::total_cmp);
        wasserstein_gaussian_sorted(&x, nodes, sigma, r)
    });
    let m = MeanEstimate::from_samples(&w);
    Ok(FloorBand { mean: m.mean, sd: m.variance().sqrt(), draws })
}

/// Law of S_n/√n against G_{σ²} across a grid, with sampling-floor correction.
///
/// Rows: `w_r` (measured W_r, floor mean in `aux`, flag = above the floor
/// band), `excess` (W_r^r − floor^r where above the band, else 0) and, for
/// Gaussian models, `closed_form` (measured W_r with the exact distance as
/// benchmark and the floor band as interval).
pub fn wasserstein_rate_experiment(
    model: &ModelSpec,
    p: f64,
    r: f64,
    n_grid: &[usize],
    reps: u64,
    ctx: &McContext<'_>,
) -> Result<ExperimentReport> {
    model.validate()?;
    if !(p > 2.0 && p < 3.0) {
        return Err(MartlabError::InvalidArgument(format!("Wasserstein rate needs p in (2,3), got {p}")));
    }
    check_order(r)?;
    if r > p {
        return Err(MartlabError::InvalidArgument(format!("order r = {r} exceeds p = {p}")));
    }
    if reps < 2 {
        return Err(MartlabError::InvalidArgument("need at least 2 replicates".into()));
    }
    let grid = check_grid(n_grid)?;
    let mut notes = crate::conditions::gate_wasserstein(model, p, r, grid[grid.len() - 1], ctx)?;
    let sigma2 = model.sigma2();
    if sigma2 <= 0.0 {
        return Err(MartlabError::DegenerateMarginal("long-run variance is zero".into()));
    }
    let sigma = sigma2.sqrt();
    let size = reps as usize;
    let nodes = GaussianNodes::new(size);
    let floor = sampling_floor(size, sigma, r, POLICY.floor_draws, &ctx.reseeded(0xf1), &nodes)?;
    let sums = partial_sums_on_grid(model, &grid, reps, &PastMode::FreshStationary, ctx)?;
    let floor_r = floor.mean.powf(r);
    let excess_stderr = r * floor.mean.powf(r - 1.0) * floor.sd;
    let mut rows = Vec::new();
    for (g, &n) in grid.iter().enumerate() {
        let scale = (n as f64).sqrt();
        let mut xs: Vec<f64> = sums[g].iter().map(|s| s / scale).collect();
        xs.sort_by(f64::total_cmp);
        let w = wasserstein_gaussian_sorted(&xs, &nodes, sigma, r);
        let above = w > floor.upper();
        rows.push(
            ReportRow::new(n as u64, "w_r", w, floor.sd)
                .with_aux(floor.mean, floor.sd)
                .with_flag(above),
        );
        let excess = if above { w.powf(r) - floor_r } else { 0.0 };
        rows.push(ReportRow::new(n as u64, "excess", excess, excess_stderr));
        if model.is_gaussian() {
            let s = (model.var_partial_sum(n) / n as f64).sqrt();
            let exact = wasserstein_gaussian_closed_form(s, sigma, r);
            let tol = (s / sigma).max(1.0) * floor.upper();
            rows.push(
                ReportRow::new(n as u64, "closed_form", w, floor.sd)
                    .with_benchmark(exact)
                    .with_interval(w - tol, w + tol),
            );
        }
    }
    let mut rules = vec![(
        "excess_slope".to_string(),
        Rule::SlopeAtMost {
            series: "excess".into(),
            field: Field::Estimate,
            max_slope: 1.0 - p / 2.0 + POLICY.wasserstein_slope_margin,
        },
    )];
    if model.is_gaussian() {
        rules.push(("closed_form_within_floor".to_string(), Rule::CoversBenchmark { series: "closed_form".into() }));
    }
    notes.push(format!(
        "sampling floor: {} Gaussian samples of size {size}, mean {:.6e}, sd {:.3e}, band mean + {} sd",
        floor.draws, floor.mean, floor.sd, POLICY.floor_band_sigmas
    ));
    Ok(ExperimentReport::build("wasserstein_rate", ctx.seed, rows, rules, notes))
}
