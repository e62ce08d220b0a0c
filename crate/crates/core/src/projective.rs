//! Projective quantities P_0(X_k), E_{-r}(S_n), E_0(S_n^2) and their Lp norms.
//!
//! Closed forms are used wherever the model structure allows: linear filters
//! through coefficient kernels, AR(1) through geometric sums, the torus walk
//! through its Fourier diagonalization (with deterministic periodic quadrature
//! for Lp norms in the uniform starting point). Everything else falls back to
//! Monte Carlo over stationary pasts.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{MartlabError, Result};
use crate::mc::{lp_norm_adaptive, lp_norm_vector_adaptive, LpEstimate, McContext};
use crate::models::{draw_stationary_past, sample_path, Complex, ModelSpec, PastMode, PastState};
use crate::special::{chi2_centered_abs_moment, gaussian_abs_moment_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// ‖E_0(S_n)‖_p
    E0Sn,
    /// ‖E_0(S_n²) − E(S_n²)‖_{p/2}
    E0SnSqCentered,
    /// ‖P_0(X_k)‖_p
    P0Xk,
    /// ‖E_{−r}(S_k)‖_p at fixed shift r
    EMinusNSk,
    /// Generic nonnegative summand sequence
    TailSeries,
    /// ‖S_n‖_p
    Sn,
}

impl NormKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::E0Sn => "e0_sn",
            NormKind::E0SnSqCentered => "e0_sn_sq_centered",
            NormKind::P0Xk => "p0_xk",
            NormKind::EMinusNSk => "e_minus_n_sk",
            NormKind::TailSeries => "tail_series",
            NormKind::Sn => "sn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormEntry {
    pub value: f64,
    pub stderr: f64,
    pub exact: bool,
    #[serde(default)]
    pub budget_exhausted: bool,
}

impl NormEntry {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, exact: true, budget_exhausted: false }
    }

    pub fn from_lp(e: LpEstimate) -> Self {
        Self { value: e.value, stderr: e.stderr, exact: false, budget_exhausted: e.budget_exhausted }
    }
}

/// Contiguous sequence of norm entries indexed from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub p: f64,
    pub kind: NormKind,
    /// Conditioning shift r for `EMinusNSk`; 0 otherwise.
    #[serde(default)]
    pub shift: usize,
    pub start: usize,
    pub entries: Vec<NormEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvEntry {
    n: usize,
    value: f64,
    stderr: f64,
    exact: bool,
}

impl NormProfile {
    pub fn new(kind: NormKind, p: f64, start: usize, entries: Vec<NormEntry>) -> Result<Self> {
        let profile = Self { p, kind, shift: 0, start, entries };
        profile.validate()?;
        Ok(profile)
    }

    /// Exact profile for indices 1..=values.len().
    pub fn from_values(kind: NormKind, p: f64, values: &[f64]) -> Result<Self> {
        Self::new(kind, p, 1, values.iter().map(|&v| NormEntry::exact(v)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(MartlabError::InvalidArgument(format!("norm exponent must be ≥ 1, got {}", self.p)));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.value >= 0.0) || !e.value.is_finite() {
                return Err(MartlabError::InvalidArgument(format!(
                    "profile entry {} has invalid value {}",
                    self.start + i,
                    e.value
                )));
            }
            if e.exact && e.stderr != 0.0 {
                return Err(MartlabError::InvalidArgument(format!(
                    "exact profile entry {} carries nonzero stderr",
                    self.start + i
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest covered index.
    pub fn max_index(&self) -> usize {
        self.start + self.entries.len() - 1
    }

    pub fn covers(&self, n: usize) -> bool {
        n >= self.start && n < self.start + self.entries.len()
    }

    pub fn entry(&self, n: usize) -> Option<&NormEntry> {
        n.checked_sub(self.start).and_then(|i| self.entries.get(i))
    }

    pub fn value(&self, n: usize) -> Option<f64> {
        self.entry(n).map(|e| e.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn all_exact(&self) -> bool {
        self.entries.iter().all(|e| e.exact)
    }

    /// CSV with columns n, value, stderr, exact.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (i, e) in self.entries.iter().enumerate() {
            wr.serialize(CsvEntry { n: self.start + i, value: e.value, stderr: e.stderr, exact: e.exact })?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, kind: NormKind, p: f64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: Vec<CsvEntry> = Vec::new();
        for row in rd.deserialize() {
            rows.push(row?);
        }
        let start = rows.first().map(|r| r.n).ok_or(MartlabError::EmptySample)?;
        for (i, r) in rows.iter().enumerate() {
            if r.n != start + i {
                return Err(MartlabError::InvalidArgument(format!("profile gap before index {}", r.n)));
            }
        }
        let entries =
            rows.into_iter().map(|r| NormEntry { value: r.value, stderr: r.stderr, exact: r.exact, budget_exhausted: false }).collect();
        Self::new(kind, p, start, entries)
    }
}

/// Σ_{k=0}^{count−1} λ^{from+k}.
fn geom_sum(lambda: f64, from: usize, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    if lambda == 1.0 {
        return count as f64;
    }
    lambda.powi(from as i32) * (1.0 - lambda.powi(count as i32)) / (1.0 - lambda)
}

fn linear_prefix(coeffs: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(coeffs.len() + 1);
    c.push(0.0);
    let mut acc = 0.0;
    for a in coeffs {
        acc += a;
        c.push(acc);
    }
    c
}

/// Kernel b_m = Σ_{i=1}^n a_{i+r+m}, m = 0..J−r−1, so that
/// E_{−r}(S_n) = Σ_m b_m ε_{−r−m}.
pub fn linear_kernel(coeffs: &[f64], n: usize, shift: usize) -> Vec<f64> {
    let lag = coeffs.len() - 1;
    if shift >= lag {
        return Vec::new();
    }
    let c = linear_prefix(coeffs);
    (0..lag - shift)
        .map(|m| {
            let lo = shift + m + 1;
            let hi = (n + shift + m).min(lag);
            c[hi + 1] - c[lo]
        })
        .collect()
}

/// Fourier coefficients (ℓ = 1..L) of ξ ↦ E(S_n | ξ_{−r} = ξ) for the torus walk.
pub fn torus_cond_coeffs(fourier: &[Complex], lambdas: &[f64], n: usize, shift: usize) -> Vec<Complex> {
    fourier.iter().zip(lambdas).map(|(c, &l)| c.scale(geom_sum(l, shift + 1, n))).collect()
}

/// P_0(X_k) given the realized past.
pub fn projection_p0(model: &ModelSpec, k: usize, past: &PastState) -> Result<f64> {
    model.validate()?;
    past.check_for(model)?;
    match (model, past) {
        (ModelSpec::Linear { .. } | ModelSpec::Iid { .. }, PastState::Innovations { window }) => {
            let (coeffs, _) = model.filter().unwrap();
            let eps0 = *window.first().ok_or(MartlabError::InsufficientPast { needed: 1, available: 0 })?;
            Ok(coeffs.get(k).copied().unwrap_or(0.0) * eps0)
        }
        (ModelSpec::Ar1 { phi, .. }, PastState::Ar1 { eps0, .. }) => {
            let eps0 = eps0.ok_or(MartlabError::InsufficientPast { needed: 2, available: 1 })?;
            Ok(phi.powi(k as i32) * eps0)
        }
        (ModelSpec::TorusWalk { fourier, .. }, PastState::Torus { xi_prev, xi0 }) => {
            let lambdas = model.torus_eigenvalues().unwrap();
            let tau = std::f64::consts::TAU;
            let mut acc = 0.0;
            for (l, (c, lam)) in fourier.iter().zip(&lambdas).enumerate() {
                let freq = (l + 1) as f64;
                let lk = lam.powi(k as i32);
                let now = c.mul(Complex::cis(tau * freq * xi0)).re;
                let before = c.mul(Complex::cis(tau * freq * xi_prev)).re;
                acc += 2.0 * lk * (now - lam * before);
            }
            Ok(acc)
        }
        _ => unreachable!("checked by check_for"),
    }
}

/// E_{−r}(S_n), treating the supplied past as the realization of F_{−r}.
pub fn cond_exp_s(model: &ModelSpec, n: usize, past: &PastState, shift: usize) -> Result<f64> {
    model.validate()?;
    past.check_for(model)?;
    if n == 0 {
        return Ok(0.0);
    }
    match (model, past) {
        (ModelSpec::Linear { .. } | ModelSpec::Iid { .. }, PastState::Innovations { window }) => {
            let (coeffs, _) = model.filter().unwrap();
            let kernel = linear_kernel(coeffs, n, shift);
            if window.len() < kernel.len() {
                return Err(MartlabError::InsufficientPast { needed: kernel.len(), available: window.len() });
            }
            Ok(kernel.iter().zip(window).map(|(b, e)| b * e).sum())
        }
        (ModelSpec::Ar1 { phi, .. }, PastState::Ar1 { x0, .. }) => Ok(x0 * geom_sum(*phi, shift + 1, n)),
        (ModelSpec::TorusWalk { fourier, .. }, PastState::Torus { xi0, .. }) => {
            let lambdas = model.torus_eigenvalues().unwrap();
            let coeffs = torus_cond_coeffs(fourier, &lambdas, n, shift);
            Ok(crate::models::trig_eval(&coeffs, *xi0))
        }
        _ => unreachable!("checked by check_for"),
    }
}

/// Var(E_{−r}(S_n)) in closed form.
pub fn cond_exp_variance(model: &ModelSpec, n: usize, shift: usize) -> f64 {
    match model {
        ModelSpec::Linear { .. } | ModelSpec::Iid { .. } => {
            let (coeffs, law) = model.filter().unwrap();
            law.variance() * linear_kernel(coeffs, n, shift).iter().map(|b| b * b).sum::<f64>()
        }
        ModelSpec::Ar1 { .. } => {
            let ModelSpec::Ar1 { phi, .. } = model else { unreachable!() };
            let g = geom_sum(*phi, shift + 1, n);
            g * g * model.variance()
        }
        ModelSpec::TorusWalk { fourier, .. } => {
            let lambdas = model.torus_eigenvalues().unwrap();
            torus_cond_coeffs(fourier, &lambdas, n, shift).iter().map(|c| 2.0 * c.norm_sqr()).sum()
        }
    }
}

/// Nodes for the Lp norm of a real trigonometric polynomial of ξ ~ U[0,1).
#[derive(Debug, Clone)]
pub struct TorusQuadrature {
    band: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    nodes: usize,
}

impl TorusQuadrature {
    pub fn new(band: usize) -> Self {
        let nodes = (64 * band).max(2048);
        let mut cos = Vec::with_capacity(nodes * band);
        let mut sin = Vec::with_capacity(nodes * band);
        for j in 0..nodes {
            let x = (j as f64 + 0.5) / nodes as f64;
            for l in 1..=band {
                let (s, c) = (std::f64::consts::TAU * l as f64 * x).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Self { band, cos, sin, nodes }
    }

    /// (∫_0^1 |2 Re Σ_ℓ c_ℓ e^{2πiℓξ}|^p dξ)^{1/p}.
    pub fn lp_norm(&self, coeffs: &[Complex], p: f64) -> f64 {
        assert!(coeffs.len() <= self.band);
        if p == 2.0 {
            return coeffs.iter().map(|c| 2.0 * c.norm_sqr()).sum::<f64>().sqrt();
        }
        let b = self.band;
        let mut acc = 0.0;
        for j in 0..self.nodes {
            let (cj, sj) = (&self.cos[j * b..j * b + coeffs.len()], &self.sin[j * b..j * b + coeffs.len()]);
            let mut v = 0.0;
            for ((c, co), si) in coeffs.iter().zip(cj).zip(sj) {
                v += c.re * co - c.im * si;
            }
            acc += (2.0 * v).abs().powf(p);
        }
        (acc / self.nodes as f64).powf(1.0 / p)
    }
}

fn require_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(MartlabError::InvalidArgument(format!("norm exponent must be ≥ 1, got {p}")));
    }
    Ok(())
}

/// ‖E_{−r}(S_n)‖_p.
pub fn norm_cond_exp(model: &ModelSpec, n: usize, shift: usize, p: f64, ctx: &McContext<'_>) -> Result<NormEntry> {
    model.validate()?;
    require_p(p)?;
    let var = cond_exp_variance(model, n, shift);
    if p == 2.0 || model.is_gaussian() {
        return Ok(NormEntry::exact(gaussian_or_l2(var, p)));
    }
    if var == 0.0 {
        return Ok(NormEntry::exact(0.0));
    }
    match model {
        ModelSpec::TorusWalk { fourier, .. } => {
            let lambdas = model.torus_eigenvalues().unwrap();
            let q = TorusQuadrature::new(fourier.len());
            Ok(NormEntry::exact(q.lp_norm(&torus_cond_coeffs(fourier, &lambdas, n, shift), p)))
        }
        _ => {
            let (coeffs, _) = model.filter().unwrap();
            let kernel = linear_kernel(coeffs, n, shift);
            let est = lp_norm_adaptive(ctx.exec, &ctx.budget, p, |r| {
                let PastState::Innovations { window } = draw_stationary_past(model, ctx.seed, r)? else {
                    unreachable!()
                };
                Ok(kernel.iter().zip(&window).map(|(b, e)| b * e).sum())
            })?;
            Ok(NormEntry::from_lp(est))
        }
    }
}

fn gaussian_or_l2(var: f64, p: f64) -> f64 {
    let sd = var.max(0.0).sqrt();
    if p == 2.0 {
        sd
    } else {
        gaussian_abs_moment_norm(p) * sd
    }
}

/// ‖E_0(S_n)‖_p.
pub fn norm_e0_sn(model: &ModelSpec, n: usize, p: f64, ctx: &McContext<'_>) -> Result<NormEntry> {
    norm_cond_exp(model, n, 0, p, ctx)
}

/// Profile n ↦ ‖E_{−r}(S_n)‖_p for n = 1..=n_max.
pub fn cond_exp_profile(model: &ModelSpec, n_max: usize, shift: usize, p: f64, ctx: &McContext<'_>) -> Result<NormProfile> {
    model.validate()?;
    require_p(p)?;
    if n_max == 0 {
        return Err(MartlabError::InvalidArgument("profile length must be positive".into()));
    }
    let kind = if shift == 0 { NormKind::E0Sn } else { NormKind::EMinusNSk };
    let entries: Vec<NormEntry> = if p == 2.0 || model.is_gaussian() {
        cond_exp_variances(model, n_max, shift).into_iter().map(|v| NormEntry::exact(gaussian_or_l2(v, p))).collect()
    } else {
        match model {
            ModelSpec::TorusWalk { fourier, .. } => {
                let lambdas = model.torus_eigenvalues().unwrap();
                let q = TorusQuadrature::new(fourier.len());
                (1..=n_max)
                    .map(|n| NormEntry::exact(q.lp_norm(&torus_cond_coeffs(fourier, &lambdas, n, shift), p)))
                    .collect()
            }
            _ => linear_profile_mc(model, n_max, shift, p, ctx)?,
        }
    };
    let mut profile = NormProfile::new(kind, p, 1, entries)?;
    profile.shift = shift;
    Ok(profile)
}

/// Var(E_{−r} S_n) for n = 1..=n_max.
fn cond_exp_variances(model: &ModelSpec, n_max: usize, shift: usize) -> Vec<f64> {
    match model {
        ModelSpec::Linear { .. } | ModelSpec::Iid { .. } => {
            // Kernels stop changing once n + r reaches the lag.
            let (coeffs, _) = model.filter().unwrap();
            let lag = coeffs.len() - 1;
            let last = n_max.min(lag.saturating_sub(shift).max(1));
            let mut out: Vec<f64> = (1..=last).map(|n| cond_exp_variance(model, n, shift)).collect();
            let tail = *out.last().unwrap();
            out.resize(n_max, tail);
            out
        }
        _ => (1..=n_max).map(|n| cond_exp_variance(model, n, shift)).collect(),
    }
}

/// Joint Monte Carlo over stationary pasts for non-Gaussian linear filters.
fn linear_profile_mc(model: &ModelSpec, n_max: usize, shift: usize, p: f64, ctx: &McContext<'_>) -> Result<Vec<NormEntry>> {
    let (coeffs, _) = model.filter().unwrap();
    let lag = coeffs.len() - 1;
    if shift >= lag {
        return Ok(vec![NormEntry::exact(0.0); n_max]);
    }
    let last = n_max.min(lag - shift);
    let kernels: Vec<Vec<f64>> = (1..=last).map(|n| linear_kernel(coeffs, n, shift)).collect();
    let est = lp_norm_vector_adaptive(ctx, last, p, |r| {
        let PastState::Innovations { window } = draw_stationary_past(model, ctx.seed, r)? else { unreachable!() };
        // The stationary past is indexed from time 0; F_{−r} starts at window[r].
        let w = &window[shift..];
        Ok(kernels.iter().map(|k| k.iter().zip(w).map(|(b, e)| b * e).sum()).collect())
    })?;
    let mut out: Vec<NormEntry> = est.into_iter().map(NormEntry::from_lp).collect();
    let tail = *out.last().unwrap();
    out.resize(n_max, tail);
    Ok(out)
}

/// Profile k ↦ ‖P_0(X_k)‖_p for k = 0..=k_max (closed form for every model).
pub fn p0_profile(model: &ModelSpec, k_max: usize, p: f64) -> Result<NormProfile> {
    model.validate()?;
    require_p(p)?;
    let entries: Vec<f64> = match model {
        ModelSpec::Linear { .. } | ModelSpec::Iid { .. } => {
            let (coeffs, law) = model.filter().unwrap();
            let m = law.lp_norm(p);
            (0..=k_max).map(|k| coeffs.get(k).map_or(0.0, |a| a.abs() * m)).collect()
        }
        ModelSpec::Ar1 { phi, innovation_sd } => {
            let m = innovation_sd * gaussian_abs_moment_norm(p);
            (0..=k_max).map(|k| phi.abs().powi(k as i32) * m).collect()
        }
        ModelSpec::TorusWalk { step, fourier } => {
            // P_0(X_k) = 2 Re Σ_ℓ c_ℓ λ_ℓ^k (±i sin 2πℓa) e(ℓ ξ_{−1}); the sign does not affect |·|.
            let lambdas = model.torus_eigenvalues().unwrap();
            let q = TorusQuadrature::new(fourier.len());
            (0..=k_max)
                .map(|k| {
                    let coeffs: Vec<Complex> = fourier
                        .iter()
                        .zip(&lambdas)
                        .enumerate()
                        .map(|(l, (c, lam))| {
                            let s = (std::f64::consts::TAU * (l + 1) as f64 * step).sin();
                            c.mul(Complex::new(0.0, s)).scale(lam.powi(k as i32))
                        })
                        .collect();
                    q.lp_norm(&coeffs, p)
                })
                .collect()
        }
    };
    NormProfile::new(NormKind::P0Xk, p, 0, entries.into_iter().map(NormEntry::exact).collect())
}

/// ‖S_n‖_p for n = 1..=n_max.
pub fn sn_profile(model: &ModelSpec, n_max: usize, p: f64, ctx: &McContext<'_>) -> Result<NormProfile> {
    model.validate()?;
    require_p(p)?;
    let entries: Vec<NormEntry> = if p == 2.0 || model.is_gaussian() {
        (1..=n_max).map(|n| NormEntry::exact(gaussian_or_l2(model.var_partial_sum(n), p))).collect()
    } else {
        let est = lp_norm_vector_adaptive(ctx, n_max, p, |r| {
            Ok(sample_path(model, n_max, &PastMode::FreshStationary, ctx.seed, r)?.partial_sums)
        })?;
        est.into_iter().map(NormEntry::from_lp).collect()
    };
    NormProfile::new(NormKind::Sn, p, 1, entries)
}

/// ‖E_0(S_n²) − E(S_n²)‖_{p_half}.
pub fn norm_e0_sn_sq_centered(model: &ModelSpec, n: usize, p_half: f64, ctx: &McContext<'_>) -> Result<NormEntry> {
    model.validate()?;
    require_p(p_half)?;
    match model {
        ModelSpec::TorusWalk { .. } => {
            let coeffs = torus_sq_centered_coeffs(model, n);
            Ok(NormEntry::exact(TorusQuadrature::new(coeffs.len()).lp_norm(&coeffs, p_half)))
        }
        ModelSpec::Ar1 { .. } => {
            // E_0(S_n²) − E(S_n²) = (E_0 S_n)² − w_n with E_0 S_n ~ N(0, w_n)
            let w = cond_exp_variance(model, n, 0);
            Ok(NormEntry::exact(w * chi2_centered_abs_moment(p_half).powf(1.0 / p_half)))
        }
        _ => {
            let (coeffs, law) = model.filter().unwrap();
            let kernel = linear_kernel(coeffs, n, 0);
            let s2 = law.variance();
            let w = s2 * kernel.iter().map(|b| b * b).sum::<f64>();
            if w == 0.0 {
                return Ok(NormEntry::exact(0.0));
            }
            if law.is_gaussian() {
                return Ok(NormEntry::exact(w * chi2_centered_abs_moment(p_half).powf(1.0 / p_half)));
            }
            if p_half == 2.0 {
                // E(Y² − w)² = E Y⁴ − w² with E Y⁴ = 3w² + (μ₄ − 3σ⁴) Σ b⁴
                let mu4 = law.abs_moment(4.0);
                let b4: f64 = kernel.iter().map(|b| b.powi(4)).sum();
                let ey4 = 3.0 * w * w + (mu4 - 3.0 * s2 * s2) * b4;
                return Ok(NormEntry::exact((ey4 - w * w).max(0.0).sqrt()));
            }
            let est = lp_norm_adaptive(ctx.exec, &ctx.budget, p_half, |r| {
                let PastState::Innovations { window } = draw_stationary_past(model, ctx.seed, r)? else {
                    unreachable!()
                };
                let y: f64 = kernel.iter().zip(&window).map(|(b, e)| b * e).sum();
                Ok(y * y - w)
            })?;
            Ok(NormEntry::from_lp(est))
        }
    }
}

/// Fourier coefficients (frequencies 1..2L) of ξ ↦ E(S_n² | ξ_0 = ξ) − E(S_n²).
pub fn torus_sq_centered_coeffs(model: &ModelSpec, n: usize) -> Vec<Complex> {
    let ModelSpec::TorusWalk { step, fourier } = model else {
        panic!("torus model required");
    };
    let band = fourier.len();
    let lam = |m: usize| (std::f64::consts::TAU * m as f64 * step).cos();
    let coef = |l: i64| -> Complex {
        if l == 0 || l.unsigned_abs() as usize > band {
            Complex::default()
        } else if l > 0 {
            fourier[l as usize - 1]
        } else {
            fourier[(-l) as usize - 1].conj()
        }
    };
    let lam_band: Vec<f64> = (0..=band).map(lam).collect();
    let lam_out: Vec<f64> = (0..=2 * band).map(lam).collect();
    // g_d(m) = Σ_ℓ c_ℓ c_{m−ℓ} λ_{|m−ℓ|}^d, the m-th coefficient of f·K^d f
    let g = |d: usize| -> Vec<Complex> {
        (1..=2 * band)
            .map(|m| {
                let mut acc = Complex::default();
                for l in -(band as i64)..=(band as i64) {
                    let k = m as i64 - l;
                    if l == 0 || k == 0 || k.unsigned_abs() as usize > band {
                        continue;
                    }
                    let w = lam_band[k.unsigned_abs() as usize].powi(d as i32);
                    let prod = coef(l).mul(coef(k)).scale(w);
                    acc = Complex::new(acc.re + prod.re, acc.im + prod.im);
                }
                acc
            })
            .collect()
    };
    // G(k) = g_0 + 2 Σ_{d=1}^k g_d; h(n+1) = λ (G(n) + h(n))
    let mut big_g = g(0);
    let mut h = vec![Complex::default(); 2 * band];
    for step_n in 0..n {
        for m in 0..2 * band {
            let s = Complex::new(big_g[m].re + h[m].re, big_g[m].im + h[m].im);
            h[m] = s.scale(lam_out[m + 1]);
        }
        if step_n + 1 < n {
            let gd = g(step_n + 1);
            for m in 0..2 * band {
                big_g[m] = Complex::new(big_g[m].re + 2.0 * gd[m].re, big_g[m].im + 2.0 * gd[m].im);
            }
        }
    }
    h
}

/// ρ(n) for models with known maximal correlation.
pub fn mixing_rho(model: &ModelSpec, n: usize) -> Result<f64> {
    model.validate()?;
    match model {
        ModelSpec::Ar1 { phi, .. } => Ok(phi.abs().powi(n as i32)),
        ModelSpec::Iid { .. } => Ok(if n == 0 { 1.0 } else { 0.0 }),
        ModelSpec::TorusWalk { .. } => Err(MartlabError::NotApplicable(
            "torus walk is not ρ-mixing: sup_ℓ |cos(2πℓa)| = 1".into(),
        )),
        ModelSpec::Linear { .. } => Err(MartlabError::Unsupported("mixing_rho on linear filters".into())),
    }
}

/// Σ_{i=0}^k 2^{i/2} ρ(2^i)^{2/p}.
pub fn majrho_bound(rho_dyadic: &[f64], k: usize, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(MartlabError::InvalidArgument(format!("p must be ≥ 2, got {p}")));
    }
    if rho_dyadic.len() <= k {
        return Err(MartlabError::InvalidArgument(format!("need {} ρ values, have {}", k + 1, rho_dyadic.len())));
    }
    let mut acc = 0.0;
    for (i, &r) in rho_dyadic.iter().take(k + 1).enumerate() {
        if !(0.0..=1.0).contains(&r) {
            return Err(MartlabError::InvalidArgument(format!("ρ value {r} outside [0,1]")));
        }
        acc += 2f64.powf(i as f64 / 2.0) * r.powf(2.0 / p);
    }
    Ok(acc)
}
