//! The approximating martingale M_n = Σ D∘θ^k, the remainder R_n = S_n − M_n,
//! and the rate bound n^{1/p′} Σ_{k ≥ ⌈n^q⌉} ‖E_0(S_k)‖_p / k^{1+1/p″}.

use serde::{Deserialize, Serialize};

use crate::error::{MartlabError, Result};
use crate::mc::{McContext, Welford, LpEstimate};
use crate::models::{sample_path, Complex, ModelSpec, PastMode, PastState, PathHistory, PathSample};
use crate::projective::{cond_exp_profile, p0_profile, projection_p0, NormProfile};
use crate::report::{ExperimentReport, Field, ReportRow, Rule, POLICY};
use crate::special::{compensated_prefix_sums, zeta_tail};

/// Exponents p′ = min(2,p), p″ = max(2,p), q = p″/p′.
pub fn exponents(p: f64) -> (f64, f64, f64) {
    let pp = p.min(2.0);
    let ps = p.max(2.0);
    (pp, ps, ps / pp)
}

/// ⌈n^q⌉ computed without drifting above an exact integer power.
pub fn ceil_pow(n: usize, q: f64) -> usize {
    let v = (n as f64).powf(q);
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        v.ceil() as usize
    }
}

/// w_k = min(1, N/(k+1)) for k = 0..=K.
pub fn d_weights(n_outer: usize, k_lag: usize) -> Vec<f64> {
    (0..=k_lag).map(|k| (n_outer as f64 / (k + 1) as f64).min(1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// D = Σ_{n<N} Σ_{k≥n} P_0(X_k)/(k+1)
    #[default]
    Cesaro,
    /// D = Σ_k P_0(X_k)
    Wu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    /// Outer cutoff N.
    pub n_outer: usize,
    /// Lag cutoff K.
    pub k_lag: usize,
    #[serde(default)]
    pub construction: Construction,
    /// Σ_{k>K} ‖P_0(X_k)‖_2, when computed.
    #[serde(default)]
    pub tail_note: Option<f64>,
}

impl TruncationParams {
    pub fn new(n_outer: usize, k_lag: usize) -> Result<Self> {
        let t = Self { n_outer, k_lag, construction: Construction::Cesaro, tail_note: None };
        t.validate()?;
        Ok(t)
    }

    pub fn with_construction(mut self, c: Construction) -> Self {
        self.construction = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_outer == 0 {
            return Err(MartlabError::InvalidArgument("N must be positive".into()));
        }
        if self.k_lag + 1 < self.n_outer {
            return Err(MartlabError::InvalidArgument(format!("need K ≥ N−1, got N={} K={}", self.n_outer, self.k_lag)));
        }
        Ok(())
    }

    /// N = K+1 = max(256, ⌈4 n_max^q⌉), with the discarded mass recorded.
    pub fn default_for(model: &ModelSpec, n_max: usize, p: f64) -> Result<Self> {
        let (_, _, q) = exponents(p);
        let n = (4 * ceil_pow(n_max, q)).max(256);
        let mut t = Self::new(n, n - 1)?;
        t.tail_note = Some(discarded_mass(model, n - 1)?);
        Ok(t)
    }

    pub fn weights(&self) -> Vec<f64> {
        match self.construction {
            Construction::Cesaro => d_weights(self.n_outer, self.k_lag),
            Construction::Wu => vec![1.0; self.k_lag + 1],
        }
    }

    pub fn label(&self) -> String {
        let c = match self.construction {
            Construction::Cesaro => "cesaro",
            Construction::Wu => "wu",
        };
        format!("{c}(N={}, K={})", self.n_outer, self.k_lag)
    }
}

/// Σ_{k>K} ‖P_0(X_k)‖_2.
pub fn discarded_mass(model: &ModelSpec, k_lag: usize) -> Result<f64> {
    match model {
        ModelSpec::Linear { .. } | ModelSpec::Iid { .. } => {
            let (coeffs, law) = model.filter().unwrap();
            Ok(law.variance().sqrt() * coeffs.iter().skip(k_lag + 1).map(|a| a.abs()).sum::<f64>())
        }
        ModelSpec::Ar1 { phi, innovation_sd } => {
            Ok(innovation_sd * phi.abs().powi(k_lag as i32 + 1) / (1.0 - phi.abs()))
        }
        ModelSpec::TorusWalk { .. } => {
            // Sum the exact L2 norms until they are negligible.
            let mut total = 0.0;
            let chunk = 4096;
            let mut from = k_lag + 1;
            loop {
                let prof = p0_profile(model, from + chunk, 2.0)?;
                let part: f64 = (from..from + chunk).map(|k| prof.value(k).unwrap()).sum();
                total += part;
                if part <= 1e-15 * total.max(1e-300) || from > 1 << 22 {
                    return Ok(total);
                }
                from += chunk;
            }
        }
    }
}

/// Collapsed form of D for each model family.
#[derive(Debug, Clone, PartialEq)]
pub enum DForm {
    /// D = c·ε_0 (linear filters, AR(1)).
    Innovation { c: f64 },
    /// D = g(ξ_0) − (Kg)(ξ_{−1}) with g given by its Fourier coefficients.
    Torus { g: Vec<Complex>, kg: Vec<Complex> },
}

pub fn d_form(model: &ModelSpec, trunc: &TruncationParams) -> Result<DForm> {
    trunc.validate()?;
    model.validate()?;
    let w = trunc.weights();
    Ok(match model {
        ModelSpec::Linear { .. } | ModelSpec::Iid { .. } => {
            let (coeffs, _) = model.filter().unwrap();
            DForm::Innovation { c: coeffs.iter().zip(&w).map(|(a, wk)| a * wk).sum() }
        }
        ModelSpec::Ar1 { phi, .. } => {
            let mut c = 0.0;
            let mut pw = 1.0;
            for wk in &w {
                c += wk * pw;
                pw *= phi;
                if pw == 0.0 {
                    break;
                }
            }
            DForm::Innovation { c }
        }
        ModelSpec::TorusWalk { fourier, .. } => {
            let lambdas = model.torus_eigenvalues().unwrap();
            let mut g = Vec::with_capacity(fourier.len());
            let mut kg = Vec::with_capacity(fourier.len());
            for (c, &lam) in fourier.iter().zip(&lambdas) {
                let mut s = 0.0;
                let mut pw = 1.0;
                for wk in &w {
                    s += wk * pw;
                    pw *= lam;
                }
                g.push(c.scale(s));
                kg.push(c.scale(s * lam));
            }
            DForm::Torus { g, kg }
        }
    })
}

/// D = Σ_{k≤K} w_k P_0(X_k) evaluated on the realized past.
pub fn build_d(model: &ModelSpec, past: &PastState, trunc: &TruncationParams) -> Result<f64> {
    past.check_for(model)?;
    match (d_form(model, trunc)?, past) {
        (DForm::Innovation { c }, PastState::Innovations { window }) => {
            let e = window.first().ok_or(MartlabError::InsufficientPast { needed: 1, available: 0 })?;
            Ok(c * e)
        }
        (DForm::Innovation { c }, PastState::Ar1 { eps0, .. }) => {
            let e = eps0.ok_or(MartlabError::InsufficientPast { needed: 2, available: 1 })?;
            Ok(c * e)
        }
        (DForm::Torus { g, kg }, PastState::Torus { xi_prev, xi0 }) => {
            Ok(crate::models::trig_eval(&g, *xi0) - crate::models::trig_eval(&kg, *xi_prev))
        }
        _ => unreachable!("checked by check_for"),
    }
}

/// Generic Σ w_k P_0(X_k) through the projection oracle (reference path).
pub fn build_d_generic(model: &ModelSpec, past: &PastState, trunc: &TruncationParams) -> Result<f64> {
    let w = trunc.weights();
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk * projection_p0(model, k, past)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct MartingaleDecomposition<'a> {
    pub path: &'a PathSample,
    /// D∘θ^1..D∘θ^n.
    pub d_values: Vec<f64>,
    pub m: Vec<f64>,
    pub r: Vec<f64>,
    pub trunc: TruncationParams,
}

impl MartingaleDecomposition<'_> {
    /// max_{k≤n} |R_k| for every n.
    pub fn running_max_abs_r(&self) -> Vec<f64> {
        let mut m: f64 = 0.0;
        self.r.iter().map(|v| {
            m = m.max(v.abs());
            m
        }).collect()
    }
}

/// D∘θ^k for k = 1..n along a path.
pub fn d_along_path(model: &ModelSpec, path: &PathSample, form: &DForm) -> Result<Vec<f64>> {
    let n = path.len();
    match (form, &path.history) {
        (DForm::Innovation { c }, PathHistory::Innovations { first_time, eps }) => {
            let off = (1 - first_time) as usize;
            Ok(eps[off..off + n].iter().map(|e| c * e).collect())
        }
        (DForm::Innovation { c }, PathHistory::Ar1 { eps, .. }) => Ok(eps.iter().map(|e| c * e).collect()),
        (DForm::Torus { g, kg }, PathHistory::Torus { positions }) => Ok((1..=n)
            .map(|k| crate::models::trig_eval(g, positions[k + 1]) - crate::models::trig_eval(kg, positions[k]))
            .collect()),
        _ => Err(MartlabError::PastMismatch { model: model.name(), past: path.past.kind() }),
    }
}

pub fn decompose_path<'a>(model: &ModelSpec, path: &'a PathSample, trunc: &TruncationParams) -> Result<MartingaleDecomposition<'a>> {
    let form = d_form(model, trunc)?;
    decompose_with(model, path, trunc, &form)
}

/// As [`decompose_path`] with a precomputed [`DForm`].
pub fn decompose_with<'a>(
    model: &ModelSpec,
    path: &'a PathSample,
    trunc: &TruncationParams,
    form: &DForm,
) -> Result<MartingaleDecomposition<'a>> {
    let d_values = d_along_path(model, path, form)?;
    let m = compensated_prefix_sums(&d_values);
    let r = path.partial_sums.iter().zip(&m).map(|(s, mk)| s - mk).collect();
    Ok(MartingaleDecomposition { path, d_values, m, r, trunc: *trunc })
}

/// How the profile tail beyond its coverage was bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    None,
    Zero,
    Stabilized,
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRhs {
    pub value: f64,
    pub covered: f64,
    pub tail: f64,
    pub method: TailMethod,
}

/// n^{1/p′} Σ_{k≥⌈n^q⌉} ‖E_0(S_k)‖_p / k^{1+1/p″}, with the part beyond the
/// profile's coverage extrapolated from its top octave.
pub fn rate_rhs(profile: &NormProfile, n: usize, p: f64) -> Result<RateRhs> {
    if n == 0 {
        return Err(MartlabError::InvalidArgument("n must be positive".into()));
    }
    if profile.is_empty() || profile.start > 1 {
        return Err(MartlabError::InvalidArgument("profile must start at k = 1".into()));
    }
    let (pp, ps, q) = exponents(p);
    let s = 1.0 + 1.0 / ps;
    let start = ceil_pow(n, q);
    let last = profile.max_index();
    let mut covered = 0.0;
    for k in start..=last {
        covered += profile.value(k).unwrap() / (k as f64).powf(s);
    }
    let (tail, method) = profile_tail(profile, start.max(last + 1), s)?;
    let scale = (n as f64).powf(1.0 / pp);
    Ok(RateRhs { value: scale * (covered + tail), covered: scale * covered, tail: scale * tail, method })
}

/// Σ_{k≥from} v_k k^{−s} for k past the profile, extrapolated.
fn profile_tail(profile: &NormProfile, from: usize, s: f64) -> Result<(f64, TailMethod)> {
    let last = profile.max_index();
    let lo = (last / 2).max(1);
    let top: Vec<(usize, f64)> = (lo..=last).map(|k| (k, profile.value(k).unwrap())).collect();
    let vmax = top.iter().map(|t| t.1).fold(0.0, f64::max);
    let vmin = top.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    if vmax == 0.0 {
        return Ok((0.0, TailMethod::Zero));
    }
    let v_last = profile.value(last).unwrap();
    if (vmax - vmin) <= 1e-9 * vmax {
        return Ok((v_last * zeta_tail(from as u64, s), TailMethod::Stabilized));
    }
    if top.len() < 4 || vmin <= 0.0 {
        return Err(MartlabError::TailNotExtrapolable(format!("top octave of length {} is not positive", top.len())));
    }
    let ns: Vec<f64> = top.iter().map(|t| t.0 as f64).collect();
    let vs: Vec<f64> = top.iter().map(|t| t.1).collect();
    let fit = crate::report::fit_slope(&ns, &vs, None)?;
    // Tolerate upward drift within the fit's own noise, but the exponent must leave a summable tail.
    let beta = fit.slope.max(0.0).max(fit.ci.1.min(fit.slope + 0.05));
    if s - beta <= 1.0 + 1e-6 {
        return Err(MartlabError::TailNotExtrapolable(format!("fitted growth exponent {beta:.3} is not summable")));
    }
    let amp = v_last / (last as f64).powf(beta);
    Ok((amp * zeta_tail(from as u64, s - beta), TailMethod::PowerLaw))
}

/// Profile length needed for rate_rhs on a grid ending at n_max.
fn profile_length(model: &ModelSpec, n_max: usize, p: f64) -> usize {
    let (_, _, q) = exponents(p);
    let need = 2 * ceil_pow(n_max, q);
    let cheap = p == 2.0 || model.is_gaussian() || model.filter().is_some();
    if cheap {
        need.max(64)
    } else {
        need.clamp(64, 4096)
    }
}

/// Remainder rates ‖S_n − M_n‖_p and ‖max_{k≤n}|S_k − M_k|‖_p against rate_rhs.
pub fn rate_experiment(
    model: &ModelSpec,
    p: f64,
    n_grid: &[usize],
    ctx: &McContext<'_>,
    construction: Construction,
) -> Result<ExperimentReport> {
    model.validate()?;
    if !(p > 1.0) {
        return Err(MartlabError::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    let grid = crate::experiment::check_grid(n_grid)?;
    let n_max = *grid.last().unwrap();
    let trunc = TruncationParams::default_for(model, n_max, p)?.with_construction(construction);
    let form = d_form(model, &trunc)?;
    let profile = cond_exp_profile(model, profile_length(model, n_max, p), 0, p, ctx)?;
    let g = grid.len();
    let reps = ctx.budget.replicates;
    let mut acc = vec![Welford::default(); 2 * g];
    let chunk = 8192u64;
    let mut done = 0u64;
    while done < reps {
        let end = (done + chunk).min(reps);
        let batch = ctx.exec.try_map(done..end, |r| {
            let path = sample_path(model, n_max, &PastMode::FreshStationary, ctx.seed, r)?;
            let dec = decompose_with(model, &path, &trunc, &form)?;
            let mut out = Vec::with_capacity(2 * g);
            let mut run: f64 = 0.0;
            let mut gi = 0;
            for (k, rk) in dec.r.iter().enumerate() {
                run = run.max(rk.abs());
                if gi < g && k + 1 == grid[gi] {
                    out.push(rk.abs().powf(p));
                    out.push(run.powf(p));
                    gi += 1;
                }
            }
            Ok(out)
        })?;
        for v in &batch {
            for (a, x) in acc.iter_mut().zip(v) {
                a.push(*x);
            }
        }
        done = end;
    }
    let mut rows = Vec::new();
    let mut notes = vec![
        format!("construction {}", trunc.label()),
        format!("discarded mass Σ_(k>K) ‖P0(X_k)‖_2 = {:.3e}", trunc.tail_note.unwrap_or(f64::NAN)),
        format!("profile length {} ({})", profile.len(), if profile.all_exact() { "exact" } else { "monte carlo" }),
        format!("replicates per n: {reps}"),
    ];
    for (i, &n) in grid.iter().enumerate() {
        let lhs = LpEstimate::from_moment(acc[2 * i].estimate(), p);
        let max_lhs = LpEstimate::from_moment(acc[2 * i + 1].estimate(), p);
        let rhs = rate_rhs(&profile, n, p)?;
        if rhs.method == TailMethod::PowerLaw {
            notes.push(format!("n={n}: profile tail extrapolated by power law"));
        }
        rows.push(ReportRow::new(n as u64, "remainder", lhs.value, lhs.stderr).with_benchmark(rhs.value));
        rows.push(
            ReportRow::new(n as u64, "max_remainder", max_lhs.value, max_lhs.stderr)
                .with_benchmark((n as f64).powf(1.0 / p))
                .with_aux(rhs.value, 0.0),
        );
    }
    let rules = vec![
        (
            "remainder_ratio_slope".to_string(),
            Rule::SlopeAtMost { series: "remainder".into(), field: Field::Ratio, max_slope: POLICY.rate_slope_tol },
        ),
        (
            "max_remainder_over_n_1_p_decays".to_string(),
            Rule::TopBelowBottom { series: "max_remainder".into(), field: Field::Ratio },
        ),
    ];
    Ok(ExperimentReport::build("rate_experiment", ctx.seed, rows, rules, notes))
}
