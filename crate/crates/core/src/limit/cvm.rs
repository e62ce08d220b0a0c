//! Cramér–von Mises statistics D_n(μ) and the τ_{μ,2,p} dependence coefficient.
//!
//! μ-integrals of 1, F and F² are tabulated on a node grid by panel
//! Gauss–Legendre; the statistic splits the line at the sample points, where
//! F_n is constant, so its steps are integrated without discretization error.

use serde::{Deserialize, Serialize};

use crate::error::{MartlabError, Result};
use crate::experiment::check_grid;
use crate::mc::{LpEstimate, McContext, MeanEstimate};
use crate::models::{draw_stationary_past, sample_path, InnovationLaw, ModelSpec, PastMode};
use crate::projective::NormEntry;
use crate::report::{ExperimentReport, Field, ReportRow, Rule};
use crate::special::{gauss_legendre, normal_cdf, normal_pdf, normal_quantile, CompensatedSum, INV_SQRT_2PI};

/// Default node count of the μ grid.
pub const DEFAULT_NODES: usize = 2048;
/// Mass of F left outside the grid on each side for unbounded laws.
const TAIL_MASS: f64 = 5e-5;
const GL_ORDER: usize = 8;

/// Closed-form marginal laws F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    /// E − 1/rate with E ~ Exp(rate).
    CenteredExponential { rate: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Marginal::CenteredExponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(MartlabError::InvalidArgument(format!("invalid marginal {self:?}")))
        }
    }

    /// Stationary marginal of a catalog model, when it has a closed form.
    pub fn of_model(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        if model.variance() <= 0.0 {
            return Err(MartlabError::DegenerateMarginal(format!("{} has a point-mass marginal", model.name())));
        }
        match model {
            ModelSpec::Ar1 { .. } => Ok(Marginal::Normal { mean: 0.0, sd: model.variance().sqrt() }),
            ModelSpec::Iid { innovation } => match *innovation {
                InnovationLaw::StandardNormal => Ok(Marginal::Normal { mean: 0.0, sd: 1.0 }),
                InnovationLaw::CenteredUniform { halfwidth } => Ok(Marginal::Uniform { lo: -halfwidth, hi: halfwidth }),
                InnovationLaw::CenteredExponential { rate } => Ok(Marginal::CenteredExponential { rate }),
                InnovationLaw::Rademacher => Err(MartlabError::Unsupported("Cramér–von Mises with a discrete marginal".into())),
            },
            ModelSpec::Linear { innovation, .. } if innovation.is_gaussian() => {
                Ok(Marginal::Normal { mean: 0.0, sd: model.variance().sqrt() })
            }
            _ => Err(MartlabError::Unsupported(format!("closed-form marginal of {}", model.name()))),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Marginal::Normal { mean, sd } => normal_cdf((t - mean) / sd),
            Marginal::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::CenteredExponential { rate } => {
                let y = t + 1.0 / rate;
                if y <= 0.0 {
                    0.0
                } else {
                    -(-rate * y).exp_m1()
                }
            }
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match *self {
            Marginal::Normal { mean, sd } => normal_pdf((t - mean) / sd) / sd,
            Marginal::Uniform { lo, hi } => {
                if (lo..=hi).contains(&t) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Marginal::CenteredExponential { rate } => {
                let y = t + 1.0 / rate;
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Marginal::Normal { mean, sd } => mean + sd * normal_quantile(u),
            Marginal::Uniform { lo, hi } => lo + u * (hi - lo),
            Marginal::CenteredExponential { rate } => -(-u).ln_1p() / rate - 1.0 / rate,
        }
    }

    /// Full support when bounded, else the central 1 − 2·TAIL_MASS range.
    fn grid_range(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lo, hi } => (lo, hi),
            Marginal::CenteredExponential { rate } => (-1.0 / rate, self.quantile(1.0 - TAIL_MASS)),
            Marginal::Normal { .. } => (self.quantile(TAIL_MASS), self.quantile(1.0 - TAIL_MASS)),
        }
    }
}

/// The measure μ in D_n(μ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum Measure {
    /// μ = dF.
    Df,
    Lebesgue,
    /// Gaussian probability measure.
    Normal { mean: f64, sd: f64 },
    /// Uniform probability measure on [lo, hi].
    Uniform { lo: f64, hi: f64 },
}

impl Measure {
    fn density(&self, marginal: &Marginal, t: f64) -> f64 {
        match *self {
            Measure::Df => marginal.density(t),
            Measure::Lebesgue => 1.0,
            Measure::Normal { mean, sd } => normal_pdf((t - mean) / sd) / sd,
            Measure::Uniform { lo, hi } => {
                if (lo..=hi).contains(&t) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }
}

/// F, μ and the discretized grid.
#[derive(Debug, Clone)]
pub struct CvmSetup {
    pub marginal: Marginal,
    pub measure: Measure,
    /// μ is scaled by this factor.
    pub mass: f64,
    pub p: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// ∫_{lo}^{x_j} (1, F, F²) dμ at every node.
    cumulative: Vec<[f64; 3]>,
    gl: (Vec<f64>, Vec<f64>),
}

impl CvmSetup {
    pub fn new(marginal: Marginal, measure: Measure, p: f64) -> Result<Self> {
        Self::with_nodes(marginal, measure, p, DEFAULT_NODES, 1.0)
    }

    pub fn with_nodes(marginal: Marginal, measure: Measure, p: f64, nodes: usize, mass: f64) -> Result<Self> {
        marginal.validate()?;
        if !(p > 1.0 && p < 2.0) {
            return Err(MartlabError::InvalidArgument(format!("CvM exponent needs p in (1,2), got {p}")));
        }
        if nodes < 2 {
            return Err(MartlabError::InvalidArgument("need at least two grid nodes".into()));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(MartlabError::InvalidArgument("measure scale must be positive".into()));
        }
        let (mut lo, mut hi) = marginal.grid_range();
        match measure {
            Measure::Uniform { lo: a, hi: b } => {
                if !(a < b) {
                    return Err(MartlabError::InvalidArgument("uniform measure needs lo < hi".into()));
                }
                lo = lo.max(a);
                hi = hi.min(b);
            }
            Measure::Normal { sd, .. } if !(sd > 0.0) => {
                return Err(MartlabError::InvalidArgument("normal measure needs sd > 0".into()));
            }
            _ => {}
        }
        if !(lo < hi) {
            return Err(MartlabError::InvalidArgument("grid/support mismatch: μ misses the support of F".into()));
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        let grid: Vec<f64> = (0..nodes).map(|j| if j + 1 == nodes { hi } else { lo + j as f64 * h }).collect();
        let gl = gauss_legendre(GL_ORDER);
        let mut setup =
            Self { marginal, measure, mass, p, nodes: grid, weights: vec![0.0; nodes], cumulative: vec![[0.0; 3]; nodes], gl };
        let mut acc = [CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default()];
        for j in 0..nodes - 1 {
            let (a, b) = (setup.nodes[j], setup.nodes[j + 1]);
            let (left, right, moments) = setup.panel(a, b);
            setup.weights[j] += left;
            setup.weights[j + 1] += right;
            for (k, m) in moments.iter().enumerate() {
                acc[k].add(*m);
            }
            setup.cumulative[j + 1] = [acc[0].value(), acc[1].value(), acc[2].value()];
        }
        if setup.cumulative[nodes - 1][0] <= 0.0 {
            return Err(MartlabError::InvalidArgument("grid/support mismatch: μ has no mass on the grid".into()));
        }
        Ok(setup)
    }

    /// Hat-function weights of the endpoints and (1, F, F²) moments on [a, b].
    fn panel(&self, a: f64, b: f64) -> (f64, f64, [f64; 3]) {
        let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
        let (mut left, mut right, mut m) = (0.0, 0.0, [0.0; 3]);
        for (x, w) in self.gl.0.iter().zip(&self.gl.1) {
            let t = mid + half * x;
            let d = w * half * self.measure.density(&self.marginal, t);
            let f = self.marginal.cdf(t);
            let s = 0.5 * (1.0 + x);
            left += d * (1.0 - s);
            right += d * s;
            m[0] += d;
            m[1] += d * f;
            m[2] += d * f * f;
        }
        (left, right, m)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights (already multiplied by `mass`).
    pub fn weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * self.mass).collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// ∫ g dμ for the piecewise-linear interpolant of node values.
    pub fn integrate_nodes(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(MartlabError::SizeMismatch { left: values.len(), right: self.nodes.len() });
        }
        let mut s = CompensatedSum::default();
        for (v, w) in values.iter().zip(&self.weights) {
            s.add(v * w);
        }
        Ok(self.mass * s.value())
    }

    /// Same grid and F, μ scaled by c.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(MartlabError::InvalidArgument("measure scale must be positive".into()));
        }
        Ok(Self { mass: self.mass * c, ..self.clone() })
    }

    /// ∫_{lo}^{t} (1, F, F²) dμ for t inside the grid.
    fn cumulative_at(&self, t: f64) -> [f64; 3] {
        let (lo, hi) = self.range();
        if t <= lo {
            return [0.0; 3];
        }
        let last = self.nodes.len() - 1;
        if t >= hi {
            return self.cumulative[last];
        }
        let h = (hi - lo) / last as f64;
        let j = (((t - lo) / h) as usize).min(last - 1);
        let j = if self.nodes[j] > t { j - 1 } else { j };
        let (_, _, m) = self.panel(self.nodes[j], t);
        let c = self.cumulative[j];
        [c[0] + m[0], c[1] + m[1], c[2] + m[2]]
    }
}

/// D_n(μ) = (∫ (F_n − F)² dμ)^{1/2} over the grid range.
pub fn cvm_statistic(sample: &[f64], setup: &CvmSetup) -> Result<f64> {
    if sample.is_empty() {
        return Err(MartlabError::EmptySample);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut prev = [0.0; 3];
    let mut acc = CompensatedSum::default();
    let mut below = 0usize;
    let push = |g: [f64; 3], c: f64, acc: &mut CompensatedSum, prev: &mut [f64; 3]| {
        acc.add(c * c * (g[0] - prev[0]) - 2.0 * c * (g[1] - prev[1]) + (g[2] - prev[2]));
        *prev = g;
    };
    for &x in &xs {
        let g = setup.cumulative_at(x);
        push(g, below as f64 / n, &mut acc, &mut prev);
        below += 1;
    }
    push(setup.cumulative[setup.nodes.len() - 1], 1.0, &mut acc, &mut prev);
    Ok((setup.mass * acc.value()).max(0.0).sqrt())
}

/// (Var E_0 X_n, Var(X_n | F_0)) when X_n given F_0 is Gaussian with a
/// Gaussian conditional mean.
fn gaussian_conditional(model: &ModelSpec, n: usize) -> Option<(f64, f64)> {
    match model {
        ModelSpec::Ar1 { phi, .. } => {
            let v = model.variance();
            let keep = phi.abs().powi(2 * n.min(i32::MAX as usize / 2) as i32);
            Some((v * keep, v * (1.0 - keep)))
        }
        ModelSpec::Iid { innovation } if innovation.is_gaussian() => Some((0.0, 1.0)),
        ModelSpec::Linear { coeffs, innovation } if innovation.is_gaussian() => {
            let split = n.min(coeffs.len());
            let cond: f64 = coeffs[..split].iter().map(|a| a * a).sum();
            let mean: f64 = coeffs[split..].iter().map(|a| a * a).sum();
            Some((mean, cond))
        }
        _ => None,
    }
}

fn check_setup_for(model: &ModelSpec, setup: &CvmSetup) -> Result<()> {
    match Marginal::of_model(model) {
        Ok(m) if m != setup.marginal => {
            Err(MartlabError::InvalidArgument(format!("setup marginal {:?} is not the law of X_0 ({m:?})", setup.marginal)))
        }
        Err(e @ MartlabError::DegenerateMarginal(_)) => Err(e),
        _ => Ok(()),
    }
}

/// τ_{μ,2,p}(F_0, X_n) = ‖ ‖F_{X_n|F_0} − F‖_{L²(μ)} ‖_p.
///
/// Exact for Gaussian conditional laws (AR(1), Gaussian linear and IID
/// models): inner norm by panel quadrature, outer Lp norm by quadrature over
/// the Gaussian conditional mean. Other models fall back to `tau_nested_mc`
/// and the entry is marked inexact.
pub fn tau_coefficient(model: &ModelSpec, n: usize, setup: &CvmSetup, p: f64, ctx: &McContext<'_>) -> Result<NormEntry> {
    model.validate()?;
    if n == 0 {
        return Err(MartlabError::InvalidArgument("tau needs n >= 1".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(MartlabError::InvalidArgument(format!("tau needs p >= 1, got {p}")));
    }
    check_setup_for(model, setup)?;
    if let ModelSpec::Iid { .. } = model {
        return Ok(NormEntry::exact(0.0));
    }
    let Some((var_m, var_c)) = gaussian_conditional(model, n) else {
        let inner = 512;
        let outer = ctx.budget.replicates.clamp(2, 4000);
        let est = tau_nested_mc(model, n, setup, p, outer, inner, ctx)?;
        return Ok(NormEntry { value: est.value, stderr: est.stderr, exact: false, budget_exhausted: est.budget_exhausted });
    };
    if var_m <= 0.0 {
        return Ok(NormEntry::exact(0.0));
    }
    let (sd_m, sd_c) = (var_m.sqrt(), var_c.sqrt());
    let (lo, hi) = setup.range();
    let inner_panels = 256usize;
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let mut inner_t = Vec::with_capacity(inner_panels * GL_ORDER);
    let mut inner_w = Vec::with_capacity(inner_panels * GL_ORDER);
    let step = (hi - lo) / inner_panels as f64;
    for k in 0..inner_panels {
        let (a, half) = (lo + k as f64 * step, 0.5 * step);
        for (x, w) in gx.iter().zip(&gw) {
            let t = a + half * (1.0 + x);
            inner_t.push((t, setup.marginal.cdf(t)));
            inner_w.push(w * half * setup.measure.density(&setup.marginal, t) * setup.mass);
        }
    }
    let h_of = |m: f64| -> f64 {
        let mut s = CompensatedSum::default();
        for ((t, f), w) in inner_t.iter().zip(&inner_w) {
            let cond = if sd_c > 0.0 {
                normal_cdf((t - m) / sd_c)
            } else if *t >= m {
                1.0
            } else {
                0.0
            };
            let d = cond - f;
            s.add(w * d * d);
        }
        s.value().max(0.0).sqrt()
    };
    let outer_panels = 36usize;
    let zmax = 9.0;
    let zstep = 2.0 * zmax / outer_panels as f64;
    let mut acc = CompensatedSum::default();
    for k in 0..outer_panels {
        let (a, half) = (-zmax + k as f64 * zstep, 0.5 * zstep);
        for (x, w) in gx.iter().zip(&gw) {
            let z = a + half * (1.0 + x);
            acc.add(w * half * INV_SQRT_2PI * (-0.5 * z * z).exp() * h_of(sd_m * z).powf(p));
        }
    }
    Ok(NormEntry::exact(acc.value().max(0.0).powf(1.0 / p)))
}

/// Nested Monte Carlo τ: `outer` stationary pasts, each with `inner` draws of
/// X_n given the past. The inner squared distance is bias-corrected for the
/// empirical CDF noise before the outer Lp norm.
pub fn tau_nested_mc(
    model: &ModelSpec,
    n: usize,
    setup: &CvmSetup,
    p: f64,
    outer: u64,
    inner: u64,
    ctx: &McContext<'_>,
) -> Result<LpEstimate> {
    if outer < 2 || inner < 2 {
        return Err(MartlabError::InvalidArgument("nested MC needs at least 2 outer and 2 inner draws".into()));
    }
    let inner_seed = ctx.reseeded(0x7a0).seed;
    let nodes = setup.nodes();
    let weights = setup.weights();
    let fvals: Vec<f64> = nodes.iter().map(|&t| setup.marginal.cdf(t)).collect();
    let h = ctx.exec.try_map(0..outer, |o| {
        let past = PastMode::Fixed(draw_stationary_past(model, ctx.seed, o)?);
        let mut xs = Vec::with_capacity(inner as usize);
        for i in 0..inner {
            let path = sample_path(model, n, &past, inner_seed, o * inner + i)?;
            xs.push(path.values[n - 1]);
        }
        xs.sort_by(f64::total_cmp);
        let m = inner as f64;
        let mut s = CompensatedSum::default();
        for ((t, f), w) in nodes.iter().zip(&fvals).zip(&weights) {
            let fh = xs.partition_point(|x| x <= t) as f64 / m;
            s.add(w * ((fh - f) * (fh - f) - fh * (1.0 - fh) / (m - 1.0)));
        }
        Ok(s.value().max(0.0).sqrt())
    })?;
    Ok(LpEstimate::from_samples(&h, p))
}

/// n^{1 − 1/p} D_n(μ) along independent stationary trajectories.
///
/// Rows `scaled_cvm` carry the mean over trajectories at each grid point;
/// `aux` holds the fraction of trajectories whose own top-half maximum is
/// below their bottom-half maximum.
pub fn cvm_rate_experiment(
    model: &ModelSpec,
    setup: &CvmSetup,
    n_grid: &[usize],
    paths: u64,
    ctx: &McContext<'_>,
) -> Result<ExperimentReport> {
    model.validate()?;
    check_setup_for(model, setup)?;
    if paths == 0 {
        return Err(MartlabError::InvalidArgument("need at least one trajectory".into()));
    }
    let grid = check_grid(n_grid)?;
    let notes = crate::conditions::gate_cvm(model, setup, ctx)?;
    let n_max = grid[grid.len() - 1];
    let expo = 1.0 - 1.0 / setup.p;
    let per_path = ctx.exec.try_map(0..paths, |rep| {
        let path = sample_path(model, n_max, &PastMode::FreshStationary, ctx.seed, rep)?;
        grid.iter()
            .map(|&n| Ok((n as f64).powf(expo) * cvm_statistic(&path.values[..n], setup)?))
            .collect::<Result<Vec<f64>>>()
    })?;
    let half = grid.len() / 2;
    let decaying = per_path
        .iter()
        .filter(|v| {
            let bottom = v[..half].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let top = v[half..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            top < bottom
        })
        .count() as f64
        / paths as f64;
    let mut rows = Vec::new();
    for (g, &n) in grid.iter().enumerate() {
        let col: Vec<f64> = per_path.iter().map(|v| v[g]).collect();
        let m = MeanEstimate::from_samples(&col);
        rows.push(ReportRow::new(n as u64, "scaled_cvm", m.mean, m.stderr).with_aux(decaying, 0.0));
    }
    let rules = vec![("scaled_cvm_decays".to_string(), Rule::TopBelowBottom { series: "scaled_cvm".into(), field: Field::Estimate })];
    let mut notes = notes;
    notes.push(format!("{paths} trajectories; p = {}; {} grid nodes", setup.p, setup.nodes.len()));
    Ok(ExperimentReport::build("cvm_rate", ctx.seed, rows, rules, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{Executor, McBudget};
    use crate::rng::{CounterStream, Purpose};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform_setup() -> CvmSetup {
        CvmSetup::new(Marginal::Uniform { lo: 0.0, hi: 1.0 }, Measure::Df, 1.5).unwrap()
    }

    #[test]
    fn single_median_point() {
        let s = uniform_setup();
        let d = cvm_statistic(&[0.5], &s).unwrap();
        assert_relative_eq!(d, 1.0 / 12f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn stratified_sample_matches_classical_formula() {
        // nω² = 1/(12n) + Σ (U_(i) − (2i−1)/(2n))² vanishes except for 1/(12n).
        let s = uniform_setup();
        for n in [1usize, 7, 100, 1000] {
            let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let d = cvm_statistic(&x, &s).unwrap();
            assert_relative_eq!(n as f64 * d * d, 1.0 / (12.0 * n as f64), max_relative = 1e-9);
        }
    }

    #[test]
    fn quadrature_reproduces_piecewise_linear_integrals() {
        let m = Marginal::Normal { mean: 0.3, sd: 1.7 };
        for measure in [Measure::Df, Measure::Lebesgue, Measure::Normal { mean: -0.5, sd: 0.8 }] {
            let s = CvmSetup::with_nodes(m, measure, 1.5, 64, 1.0).unwrap();
            let g: Vec<f64> = s.nodes().iter().map(|x| (3.0 * x).sin() + x * x).collect();
            assert!(s.weights().iter().all(|w| *w >= 0.0));
            let quad = s.integrate_nodes(&g).unwrap();
            // Independent evaluation: fine midpoint rule on each linear piece.
            let mut exact = 0.0;
            let xs = s.nodes();
            for j in 0..xs.len() - 1 {
                let k = 4000;
                let hstep = (xs[j + 1] - xs[j]) / k as f64;
                for i in 0..k {
                    let t = xs[j] + (i as f64 + 0.5) * hstep;
                    let lam = (t - xs[j]) / (xs[j + 1] - xs[j]);
                    exact += ((1.0 - lam) * g[j] + lam * g[j + 1]) * measure.density(&m, t) * hstep;
                }
            }
            assert_relative_eq!(quad, exact, epsilon = 1e-10, max_relative = 1e-7);
        }
        let s = CvmSetup::new(m, Measure::Df, 1.5).unwrap();
        let ones = vec![1.0; s.nodes().len()];
        assert_relative_eq!(s.integrate_nodes(&ones).unwrap(), 1.0 - 2.0 * TAIL_MASS, epsilon = 1e-9);
    }

    #[test]
    fn iid_uniform_mean_n_omega2() {
        let s = uniform_setup();
        let n = 200;
        let reps = 4000;
        let v: Vec<f64> = (0..reps)
            .map(|r| {
                let mut st = CounterStream::new(1, Purpose::Aux(2), r);
                let x: Vec<f64> = (0..n).map(|_| st.uniform()).collect();
                let d = cvm_statistic(&x, &s).unwrap();
                n as f64 * d * d
            })
            .collect();
        let m = MeanEstimate::from_samples(&v);
        assert!((m.mean - 1.0 / 6.0).abs() < 4.0 * m.stderr, "{m:?}");
    }

    #[test]
    fn errors() {
        let s = uniform_setup();
        assert!(matches!(cvm_statistic(&[], &s), Err(MartlabError::EmptySample)));
        assert!(CvmSetup::new(Marginal::Uniform { lo: 0.0, hi: 1.0 }, Measure::Uniform { lo: 2.0, hi: 3.0 }, 1.5).is_err());
        let constant = ModelSpec::linear(vec![0.0], InnovationLaw::StandardNormal);
        assert!(matches!(Marginal::of_model(&constant), Err(MartlabError::DegenerateMarginal(_))));
        let exec = Executor::serial();
        let ctx = McContext::new(&exec, 1, McBudget::default());
        assert!(matches!(
            cvm_rate_experiment(&constant, &s, &[1, 2, 4, 8], 1, &ctx),
            Err(MartlabError::DegenerateMarginal(_))
        ));
    }

    #[test]
    fn tau_iid_zero_and_ar1_decreasing() {
        let exec = Executor::serial();
        let ctx = McContext::new(&exec, 1, McBudget::default());
        let iid = ModelSpec::iid(InnovationLaw::StandardNormal);
        let s = CvmSetup::new(Marginal::Normal { mean: 0.0, sd: 1.0 }, Measure::Df, 1.5).unwrap();
        assert_eq!(tau_coefficient(&iid, 1, &s, 1.5, &ctx).unwrap().value, 0.0);
        let ar1 = ModelSpec::ar1(0.5, 1.0);
        let s = CvmSetup::new(Marginal::of_model(&ar1).unwrap(), Measure::Df, 1.5).unwrap();
        let taus: Vec<f64> = (1..=12).map(|n| tau_coefficient(&ar1, n, &s, 1.5, &ctx).unwrap().value).collect();
        assert!(taus[0] > 0.0);
        assert!(taus.windows(2).all(|w| w[1] < w[0]), "{taus:?}");
        assert!(taus[11] < 1e-3 * taus[0]);
    }

    #[test]
    fn tau_ar1_against_nested_mc() {
        let exec = Executor::new(2).unwrap();
        let ctx = McContext::new(&exec, 77, McBudget::default());
        let ar1 = ModelSpec::ar1(0.5, 1.0);
        let s = CvmSetup::new(Marginal::of_model(&ar1).unwrap(), Measure::Normal { mean: 0.0, sd: 1.0 }, 1.5).unwrap();
        let exact = tau_coefficient(&ar1, 1, &s, 1.5, &ctx).unwrap();
        assert!(exact.exact);
        let mc = tau_nested_mc(&ar1, 1, &s, 1.5, 3000, 1000, &ctx).unwrap();
        assert!((mc.value - exact.value).abs() < 4.0 * mc.stderr, "{mc:?} vs {exact:?}");
    }

    #[test]
    fn iid_uniform_rate_experiment_decays() {
        let exec = Executor::new(2).unwrap();
        let ctx = McContext::new(&exec, 4, McBudget::default());
        let model = ModelSpec::iid(InnovationLaw::CenteredUniform { halfwidth: 0.5 });
        let s = CvmSetup::new(Marginal::of_model(&model).unwrap(), Measure::Df, 1.5).unwrap();
        let grid: Vec<usize> = (4..=14).map(|k| 1 << k).collect();
        let rep = cvm_rate_experiment(&model, &s, &grid, 16, &ctx).unwrap();
        assert_eq!(rep.verdict(), crate::report::Verdict::Pass);
    }

    proptest! {
        #[test]
        fn relabel_invariance_and_mass_scaling(
            mut x in prop::collection::vec(-3.0f64..3.0, 1..50),
            c in 0.01f64..100.0,
            seed in any::<u64>(),
        ) {
            let s = CvmSetup::with_nodes(Marginal::Normal { mean: 0.0, sd: 1.0 }, Measure::Lebesgue, 1.5, 256, 1.0).unwrap();
            let d = cvm_statistic(&x, &s).unwrap();
            let k = x.len();
            x.rotate_left((seed % k as u64) as usize);
            x.reverse();
            prop_assert!((cvm_statistic(&x, &s).unwrap() - d).abs() <= 1e-12 * d.max(1.0));
            let dc = cvm_statistic(&x, &s.scaled(c).unwrap()).unwrap();
            prop_assert!((dc - c.sqrt() * d).abs() <= 1e-10 * dc.max(1e-300));
        }
    }
}
