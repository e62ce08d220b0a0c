//! Finite-n diagnostics for projective series conditions.
//!
//! A series Σ u_n is judged from the log-log slope of its summand over the
//! top dyadic octave of the covered range: below −1 − margin is CONVERGENT,
//! above −1 + margin is DIVERGENT, anything between is INCONCLUSIVE. Dyadic
//! series Σ_k t_k are mapped to the equivalent u_n = t(log₂ n)/n first.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::approx::exponents;
use crate::error::{MartlabError, Result};
use crate::limit::cvm::{tau_coefficient, CvmSetup};
use crate::mc::McContext;
use crate::models::ModelSpec;
use crate::projective::{
    cond_exp_profile, cond_exp_variance, norm_e0_sn_sq_centered, p0_profile, sn_profile, NormEntry, NormKind, NormProfile,
};
use crate::report::POLICY;
use crate::special::{zeta_tail, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionName {
    /// Σ ‖E_0 S_n‖_2 / n^{3/2}
    Mw,
    /// Σ ‖E_0 S_n‖_p / n^{1 + 1/p''}
    MwPalpha,
    /// Σ ‖E_0 S_n‖_p / n^{1 + α}
    MwStarP,
    /// Σ_{n≥2} log n ‖E_0 S_n‖_p / n^{3/2}
    CondMzFirst,
    /// Σ_{n≥2} log n ‖P_0 X_n‖_p
    CondMzSecond,
    /// Σ ‖E_0 S_n‖_p / n^{1 + 2/p²}
    CondMdp1First,
    /// Σ n^{−2/p} Σ_{k≥n} ‖E_{−n} S_k‖_2 / k^{3/2}
    CondMdp1Second,
    /// Σ_k 2^{−2k/p} ‖E_0 S²_{2^k} − E S²_{2^k}‖_{p/2}
    CondSnMdp,
    /// Σ n^{−1−2/p} ‖E_0 S_n² − E S_n²‖_{p/2}
    CondSnMdpNondya,
    /// Σ ‖E_0 S_n‖_p² / n^{1 + 4/p²}
    Cond1Wasser,
    /// Σ ‖E_0 S_n‖_2 / n^{(5−p)/2}
    Cond2WasserRLe2,
    /// ‖E_0 S_n‖_r = O(n^{(3−p)/r})
    Cond2WasserRGt2,
    /// Σ_{n≥2} log n τ(F_0, X_n) / n^{1/2}
    CondCvm,
    /// Σ ‖S_n‖_p / (ψ(n) n^{1 + 1/p})
    Mw1Psi,
}

impl ConditionName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionName::Mw => "MW",
            ConditionName::MwPalpha => "MWpalpha",
            ConditionName::MwStarP => "MWstar_p",
            ConditionName::CondMzFirst => "CondMZ_first",
            ConditionName::CondMzSecond => "CondMZ_second",
            ConditionName::CondMdp1First => "condMDP1_first",
            ConditionName::CondMdp1Second => "condMDP1_second",
            ConditionName::CondSnMdp => "condSnMDP",
            ConditionName::CondSnMdpNondya => "condSnMDPnondya",
            ConditionName::Cond1Wasser => "cond1Wasser",
            ConditionName::Cond2WasserRLe2 => "cond2Wasser_r_le_2",
            ConditionName::Cond2WasserRGt2 => "cond2Wasser_r_gt_2",
            ConditionName::CondCvm => "condCVM",
            ConditionName::Mw1Psi => "MW1_psi",
        }
    }

    /// Profile kind the summand is built from.
    pub fn profile_kind(&self) -> NormKind {
        match self {
            ConditionName::CondMzSecond => NormKind::P0Xk,
            ConditionName::CondMdp1Second => NormKind::EMinusNSk,
            ConditionName::CondSnMdp | ConditionName::CondSnMdpNondya => NormKind::E0SnSqCentered,
            ConditionName::CondCvm => NormKind::TailSeries,
            ConditionName::Mw1Psi => NormKind::Sn,
            _ => NormKind::E0Sn,
        }
    }
}

/// Weight ψ in the ergodic-rate condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "psi", rename_all = "snake_case")]
pub enum Psi {
    #[default]
    One,
    /// 1 + log n
    Log,
    /// n^exponent, exponent ≥ 0
    Power { exponent: f64 },
}

impl Psi {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Psi::Power { exponent } if !(exponent >= 0.0 && exponent.is_finite()) => {
                Err(MartlabError::InvalidArgument(format!("psi exponent must be >= 0, got {exponent}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            Psi::One => 1.0,
            Psi::Log => 1.0 + n.ln(),
            Psi::Power { exponent } => n.powf(exponent),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Psi::One => "1".into(),
            Psi::Log => "1+log n".into(),
            Psi::Power { exponent } => format!("n^{exponent}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeriesVerdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl std::fmt::Display for SeriesVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeriesVerdict::Convergent => "CONVERGENT",
            SeriesVerdict::Divergent => "DIVERGENT",
            SeriesVerdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// A named condition bound to the profile its summand is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCondition {
    pub name: ConditionName,
    pub p: f64,
    /// α for `MwStarP` (default min(1/2, 2/p²)).
    pub alpha: Option<f64>,
    /// Order r for `Cond2WasserRGt2`.
    pub r: Option<f64>,
    pub psi: Psi,
    pub profile: NormProfile,
}

impl SeriesCondition {
    pub fn new(name: ConditionName, p: f64, profile: NormProfile) -> Self {
        Self { name, p, alpha: None, r: None, psi: Psi::One, profile }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_psi(mut self, psi: Psi) -> Self {
        self.psi = psi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(MartlabError::InvalidArgument(format!("condition needs p > 1, got {}", self.p)));
        }
        self.psi.validate()?;
        if self.name == ConditionName::CondMdp1Second {
            return Err(MartlabError::InvalidArgument("condMDP1_second is doubly indexed; use cond_mdp1_second".into()));
        }
        if self.profile.kind != self.name.profile_kind() {
            return Err(MartlabError::InvalidArgument(format!(
                "{} needs a {} profile, got {}",
                self.name.as_str(),
                self.name.profile_kind().as_str(),
                self.profile.kind.as_str()
            )));
        }
        let (_, _, _) = exponents(self.p);
        if let Some(a) = self.alpha {
            let (_, p2, _) = exponents(self.p);
            if !(a > 0.0 && a <= 1.0 / p2 + 1e-15) {
                return Err(MartlabError::InvalidArgument(format!("alpha must lie in (0, 1/p''], got {a}")));
            }
        }
        if self.name == ConditionName::Cond2WasserRGt2 {
            let r = self.r.ok_or_else(|| MartlabError::InvalidArgument("cond2Wasser_r_gt_2 needs r".into()))?;
            if !(r > 2.0 && r <= self.p) {
                return Err(MartlabError::InvalidArgument(format!("r must lie in (2, p], got {r}")));
            }
        }
        Ok(())
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| (0.5f64).min(2.0 / (self.p * self.p)))
    }

    pub fn params(&self) -> String {
        let mut s = format!("p={}", self.p);
        match self.name {
            ConditionName::MwStarP => s.push_str(&format!(";alpha={}", self.alpha())),
            ConditionName::Cond2WasserRGt2 => s.push_str(&format!(";r={}", self.r.unwrap_or(f64::NAN))),
            ConditionName::Mw1Psi => s.push_str(&format!(";psi={}", self.psi.label())),
            _ => {}
        }
        s
    }

    fn is_dyadic(&self) -> bool {
        self.name == ConditionName::CondSnMdp
    }

    fn is_big_o(&self) -> bool {
        self.name == ConditionName::Cond2WasserRGt2
    }

    /// Summand at index n (for dyadic series, n = 2^k gives t_k).
    fn summand(&self, n: usize, v: f64) -> f64 {
        let nf = n as f64;
        let p = self.p;
        let (_, p2, _) = exponents(p);
        match self.name {
            ConditionName::Mw => v / nf.powf(1.5),
            ConditionName::MwPalpha => v / nf.powf(1.0 + 1.0 / p2),
            ConditionName::MwStarP => v / nf.powf(1.0 + self.alpha()),
            ConditionName::CondMzFirst => nf.ln() * v / nf.powf(1.5),
            ConditionName::CondMzSecond => nf.ln() * v,
            ConditionName::CondMdp1First => v / nf.powf(1.0 + 2.0 / (p * p)),
            ConditionName::CondSnMdp => v / nf.powf(2.0 / p),
            ConditionName::CondSnMdpNondya => v / nf.powf(1.0 + 2.0 / p),
            ConditionName::Cond1Wasser => v * v / nf.powf(1.0 + 4.0 / (p * p)),
            ConditionName::Cond2WasserRLe2 => v / nf.powf((5.0 - p) / 2.0),
            ConditionName::Cond2WasserRGt2 => v / nf.powf((3.0 - p) / self.r.unwrap_or(p)),
            ConditionName::CondCvm => nf.ln() * v / nf.sqrt(),
            ConditionName::Mw1Psi => v / (self.psi.eval(nf) * nf.powf(1.0 + 1.0 / p)),
            ConditionName::CondMdp1Second => f64::NAN,
        }
    }

    fn first_index(&self) -> usize {
        match self.name {
            ConditionName::CondMzFirst | ConditionName::CondMzSecond | ConditionName::CondCvm => 2,
            _ => 1,
        }
    }
}

/// Partial sums, tail slope and verdict of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostic {
    pub condition: String,
    pub params: String,
    /// (index, partial sum through that index); for O-type conditions the running maximum of the ratio.
    pub partial_sums: Vec<(u64, f64)>,
    pub tail_slope: Option<f64>,
    /// Extrapolated remainder beyond the covered range, when convergent.
    pub tail_estimate: Option<f64>,
    pub verdict: SeriesVerdict,
    pub notes: Vec<String>,
}

impl SeriesDiagnostic {
    pub fn partial_sum(&self) -> f64 {
        self.partial_sums.last().map_or(0.0, |x| x.1)
    }
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn classify(slope: f64) -> SeriesVerdict {
    let m = POLICY.series_margin;
    if slope < -1.0 - m {
        SeriesVerdict::Convergent
    } else if slope > -1.0 + m {
        SeriesVerdict::Divergent
    } else {
        SeriesVerdict::Inconclusive
    }
}

/// Slope of log u over log n for the positive entries of `pts`; None when the
/// window is identically zero, Err when fewer than 3 positive points remain.
fn window_slope(pts: &[(f64, f64)]) -> std::result::Result<Option<f64>, String> {
    if pts.iter().all(|p| p.1 == 0.0) {
        return Ok(None);
    }
    let pos: Vec<&(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).collect();
    if pos.len() < 3 {
        return Err(format!("only {} positive summands in the fit window", pos.len()));
    }
    let x: Vec<f64> = pos.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pos.iter().map(|p| p.1.ln()).collect();
    Ok(Some(ols_slope(&x, &y)))
}

/// Verdict for Σ_{n ≥ start} u_n from summands u_start..u_{n_max}.
pub fn diagnose_summands(label: &str, params: &str, start: usize, summands: &[f64]) -> Result<SeriesDiagnostic> {
    if summands.is_empty() {
        return Err(MartlabError::InvalidArgument("no summands".into()));
    }
    if summands.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
        return Err(MartlabError::InvalidArgument("summands must be finite and nonnegative".into()));
    }
    let n_max = start + summands.len() - 1;
    let mut acc = CompensatedSum::default();
    let mut partial = Vec::with_capacity(summands.len());
    for (i, u) in summands.iter().enumerate() {
        acc.add(*u);
        partial.push(((start + i) as u64, acc.value()));
    }
    let lo = (n_max / 2).max(start);
    let window: Vec<(f64, f64)> = (lo..=n_max).map(|n| (n as f64, summands[n - start])).collect();
    let mut notes = Vec::new();
    let (slope, verdict) = match window_slope(&window) {
        Ok(None) => {
            notes.push("summands vanish over the top octave".into());
            (None, SeriesVerdict::Convergent)
        }
        Ok(Some(s)) => (Some(s), classify(s)),
        Err(e) => {
            notes.push(e);
            (None, SeriesVerdict::Inconclusive)
        }
    };
    let tail_estimate = match (verdict, slope) {
        (SeriesVerdict::Convergent, Some(s)) => {
            notes.push("tail extrapolated from the fitted power law".into());
            Some(summands[summands.len() - 1] * n_max as f64 / (-s - 1.0))
        }
        (SeriesVerdict::Convergent, None) => Some(0.0),
        _ => None,
    };
    Ok(SeriesDiagnostic {
        condition: label.to_string(),
        params: params.to_string(),
        partial_sums: partial,
        tail_slope: slope,
        tail_estimate,
        verdict,
        notes,
    })
}

/// Verdict for Σ_{k≥0} t_k with t_k attached to n = 2^k. The fit runs over
/// the upper half of the k range; the reported slope is the equivalent
/// power-law slope of t(log₂ n)/n.
pub fn diagnose_dyadic(label: &str, params: &str, terms: &[f64]) -> Result<SeriesDiagnostic> {
    if terms.len() < 2 {
        return Err(MartlabError::InvalidArgument("dyadic series needs at least two terms".into()));
    }
    if terms.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
        return Err(MartlabError::InvalidArgument("terms must be finite and nonnegative".into()));
    }
    let mut acc = CompensatedSum::default();
    let partial: Vec<(u64, f64)> = terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            acc.add(*t);
            (1u64 << k.min(63), acc.value())
        })
        .collect();
    let k_lo = terms.len() / 2;
    let window: Vec<(f64, f64)> = (k_lo..terms.len()).map(|k| ((k as f64).exp2(), terms[k])).collect();
    let mut notes = Vec::new();
    let (slope, verdict) = match window_slope(&window) {
        Ok(None) => {
            notes.push("terms vanish over the upper half of the dyadic range".into());
            (None, SeriesVerdict::Convergent)
        }
        Ok(Some(s)) => (Some(s - 1.0), classify(s - 1.0)),
        Err(e) => {
            // Super-geometric decay leaves only a few positive terms before underflow.
            let pos: Vec<f64> = window.iter().map(|w| w.1).filter(|t| *t > 0.0).collect();
            let shrinking = pos.windows(2).all(|w| w[1] < w[0]) && window.last().map(|w| w.1) == Some(0.0);
            notes.push(e);
            if shrinking {
                notes.push("terms underflow to zero".into());
                (None, SeriesVerdict::Convergent)
            } else {
                (None, SeriesVerdict::Inconclusive)
            }
        }
    };
    let tail_estimate = match (verdict, slope) {
        (SeriesVerdict::Convergent, Some(s)) => {
            // Geometric ratio 2^{s+1} per step.
            let ratio = (s + 1.0).exp2();
            Some(terms[terms.len() - 1] * ratio / (1.0 - ratio))
        }
        (SeriesVerdict::Convergent, None) => Some(0.0),
        _ => None,
    };
    Ok(SeriesDiagnostic {
        condition: label.to_string(),
        params: params.to_string(),
        partial_sums: partial,
        tail_slope: slope,
        tail_estimate,
        verdict,
        notes,
    })
}

/// O(n^β) condition judged on the ratio v_n / n^β: slope ≤ rate_slope_tol holds,
/// slope > series_margin fails, else inconclusive.
fn diagnose_big_o(label: &str, params: &str, ratios: &[f64]) -> Result<SeriesDiagnostic> {
    let n_max = ratios.len();
    let mut run = 0.0f64;
    let partial: Vec<(u64, f64)> = ratios
        .iter()
        .enumerate()
        .map(|(i, v)| {
            run = run.max(*v);
            ((i + 1) as u64, run)
        })
        .collect();
    let window: Vec<(f64, f64)> = ((n_max / 2).max(1)..=n_max).map(|n| (n as f64, ratios[n - 1])).collect();
    let mut notes = Vec::new();
    let (slope, verdict) = match window_slope(&window) {
        Ok(None) => (None, SeriesVerdict::Convergent),
        Ok(Some(s)) => {
            let v = if s <= POLICY.rate_slope_tol {
                SeriesVerdict::Convergent
            } else if s > POLICY.series_margin {
                SeriesVerdict::Divergent
            } else {
                SeriesVerdict::Inconclusive
            };
            (Some(s), v)
        }
        Err(e) => {
            notes.push(e);
            (None, SeriesVerdict::Inconclusive)
        }
    };
    notes.push("O-type condition: slope is that of the ratio, verdict CONVERGENT means bounded".into());
    Ok(SeriesDiagnostic {
        condition: label.to_string(),
        params: params.to_string(),
        partial_sums: partial,
        tail_slope: slope,
        tail_estimate: None,
        verdict,
        notes,
    })
}

/// Partial sums, top-octave tail slope and verdict of a named condition.
pub fn series_partial(cond: &SeriesCondition, n_max: usize) -> Result<SeriesDiagnostic> {
    cond.validate()?;
    let label = cond.name.as_str();
    let params = cond.params();
    let first = cond.first_index();
    let value = |n: usize| -> Result<f64> {
        cond.profile
            .value(n)
            .ok_or_else(|| MartlabError::InvalidArgument(format!("profile gap: {label} needs index {n}")))
    };
    let mut diag = if cond.is_dyadic() {
        if n_max < 2 {
            return Err(MartlabError::InvalidArgument("dyadic condition needs n_max >= 2".into()));
        }
        let k_max = n_max.ilog2() as usize;
        let terms = (0..=k_max).map(|k| value(1 << k).map(|v| cond.summand(1 << k, v))).collect::<Result<Vec<_>>>()?;
        diagnose_dyadic(label, &params, &terms)?
    } else if cond.is_big_o() {
        let ratios = (1..=n_max).map(|n| value(n).map(|v| cond.summand(n, v))).collect::<Result<Vec<_>>>()?;
        diagnose_big_o(label, &params, &ratios)?
    } else {
        if n_max < first + 3 {
            return Err(MartlabError::InvalidArgument(format!("{label} needs n_max >= {}", first + 3)));
        }
        let u = (first..=n_max).map(|n| value(n).map(|v| cond.summand(n, v))).collect::<Result<Vec<_>>>()?;
        diagnose_summands(label, &params, first, &u)?
    };
    if !cond.profile.all_exact() {
        diag.notes.push("profile contains Monte Carlo entries".into());
    }
    Ok(diag)
}

/// Σ_n n^{−2/p} Σ_{k≥n} a(n, k)/k^{3/2} for an arbitrary inner norm a(n, k).
/// The inner sum is computed through k_max and completed by holding a(n, k_max)
/// constant beyond it.
pub fn cond_mdp1_second_from(
    inner_norm: impl Fn(usize, usize) -> Result<f64>,
    n_max: usize,
    k_max: usize,
    p: f64,
) -> Result<SeriesDiagnostic> {
    if !(p > 0.0) || n_max < 4 || k_max < n_max {
        return Err(MartlabError::InvalidArgument("need p > 0, n_max >= 4 and k_max >= n_max".into()));
    }
    let mut u = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut inner = CompensatedSum::default();
        let mut last = 0.0;
        for k in n..=k_max {
            last = inner_norm(n, k)?;
            inner.add(last / (k as f64).powf(1.5));
        }
        inner.add(last * zeta_tail((k_max + 1) as u64, 1.5));
        u.push(inner.value() / (n as f64).powf(2.0 / p));
    }
    let mut d = diagnose_summands(ConditionName::CondMdp1Second.as_str(), &format!("p={p};k_max={k_max}"), 1, &u)?;
    d.notes.push("inner sums completed beyond k_max with the last inner norm held fixed".into());
    Ok(d)
}

/// condMDP1 second display for a catalog model, from exact L² shifted norms.
pub fn cond_mdp1_second(model: &ModelSpec, n_max: usize, p: f64) -> Result<SeriesDiagnostic> {
    model.validate()?;
    let k_max = 8 * n_max;
    cond_mdp1_second_from(|n, k| Ok(cond_exp_variance(model, k, n).max(0.0).sqrt()), n_max, k_max, p)
}

/// Both sides of n^{−γ} max_{k≤n} a_k ≤ 2^{3γ+3} Σ_{k=n+1}^{6n} a_k / k^{γ+1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubLemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `norm_seq[k − 1]` holds a_k for k = 1..=6n.
pub fn sub_lemma_check(norm_seq: &[f64], gamma: f64, n: usize) -> Result<SubLemmaCheck> {
    if n == 0 || !(gamma > 0.0) {
        return Err(MartlabError::InvalidArgument("need n >= 1 and gamma > 0".into()));
    }
    if norm_seq.len() < 6 * n {
        return Err(MartlabError::InvalidArgument(format!("sequence has {} terms, need {}", norm_seq.len(), 6 * n)));
    }
    let lhs = norm_seq[..n].iter().copied().fold(0.0, f64::max) / (n as f64).powf(gamma);
    let mut s = CompensatedSum::default();
    for k in n + 1..=6 * n {
        s.add(norm_seq[k - 1] / (k as f64).powf(gamma + 1.0));
    }
    let rhs = (3.0 * gamma + 3.0).exp2() * s.value();
    Ok(SubLemmaCheck { lhs, rhs, holds: lhs <= rhs })
}

/// The two ρ-mixing series Σ 2^{k(1/2−2/p²)} ρ^{2/p}(2^k) and Σ 2^{k(1−2/p)} ρ^s(2^k),
/// s = min(1, 2(r−2)/r).
pub fn condmdprho_check(rho_dyadic: &[f64], p: f64, r: f64) -> Result<(SeriesDiagnostic, SeriesDiagnostic)> {
    if !(p > 2.0 && p <= 4.0) || !(r >= p) {
        return Err(MartlabError::InvalidArgument(format!("need p in (2,4] and r >= p, got p={p}, r={r}")));
    }
    if rho_dyadic.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(MartlabError::InvalidArgument("rho values must lie in [0,1]".into()));
    }
    let s = (1.0f64).min(2.0 * (r - 2.0) / r);
    let first: Vec<f64> =
        rho_dyadic.iter().enumerate().map(|(k, rho)| (k as f64 * (0.5 - 2.0 / (p * p))).exp2() * rho.powf(2.0 / p)).collect();
    let second: Vec<f64> =
        rho_dyadic.iter().enumerate().map(|(k, rho)| (k as f64 * (1.0 - 2.0 / p)).exp2() * rho.powf(s)).collect();
    let params = format!("p={p};r={r};s={s}");
    Ok((diagnose_dyadic("condmdprho_first", &params, &first)?, diagnose_dyadic("condmdprho_second", &params, &second)?))
}

/// A condition evaluated against a catalog model; the profile is built on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub name: ConditionName,
    pub p: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub psi: Psi,
    #[serde(default = "default_condition_n_max")]
    pub n_max: usize,
}

fn default_condition_n_max() -> usize {
    256
}

impl ConditionSpec {
    pub fn new(name: ConditionName, p: f64) -> Self {
        Self { name, p, alpha: None, r: None, psi: Psi::One, n_max: default_condition_n_max() }
    }
}

/// Build the profile a condition needs and diagnose it.
pub fn evaluate_condition(model: &ModelSpec, spec: &ConditionSpec, ctx: &McContext<'_>) -> Result<SeriesDiagnostic> {
    model.validate()?;
    let n = spec.n_max;
    if n < 8 {
        return Err(MartlabError::InvalidArgument("condition n_max must be at least 8".into()));
    }
    let p = spec.p;
    let profile = match spec.name {
        ConditionName::CondMdp1Second => return cond_mdp1_second(model, n, p),
        ConditionName::Mw | ConditionName::Cond2WasserRLe2 => cond_exp_profile(model, n, 0, 2.0, ctx)?,
        ConditionName::Cond2WasserRGt2 => {
            let r = spec.r.ok_or_else(|| MartlabError::InvalidArgument("cond2Wasser_r_gt_2 needs r".into()))?;
            cond_exp_profile(model, n, 0, r, ctx)?
        }
        ConditionName::CondMzSecond => p0_profile(model, n, p)?,
        ConditionName::CondSnMdp | ConditionName::CondSnMdpNondya => {
            let entries = (1..=n)
                .map(|k| {
                    if spec.name == ConditionName::CondSnMdp && !k.is_power_of_two() {
                        Ok(NormEntry::exact(f64::NAN))
                    } else {
                        norm_e0_sn_sq_centered(model, k, p / 2.0, ctx)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            NormProfile::new(NormKind::E0SnSqCentered, p / 2.0, 1, entries)?
        }
        ConditionName::CondCvm => {
            let marginal = crate::limit::cvm::Marginal::of_model(model)?;
            let setup = CvmSetup::new(marginal, crate::limit::cvm::Measure::Df, p)?;
            tau_profile(model, &setup, n, ctx)?
        }
        ConditionName::Mw1Psi => sn_profile(model, n, p, ctx)?,
        _ => cond_exp_profile(model, n, 0, p, ctx)?,
    };
    let mut cond = SeriesCondition::new(spec.name, p, profile).with_psi(spec.psi);
    cond.alpha = spec.alpha;
    cond.r = spec.r;
    series_partial(&cond, n)
}

/// n ↦ τ_{μ,2,p}(F_0, X_n) for n = 1..=n_max.
pub fn tau_profile(model: &ModelSpec, setup: &CvmSetup, n_max: usize, ctx: &McContext<'_>) -> Result<NormProfile> {
    let entries = (1..=n_max).map(|n| tau_coefficient(model, n, setup, setup.p, ctx)).collect::<Result<Vec<_>>>()?;
    NormProfile::new(NormKind::TailSeries, setup.p, 1, entries)
}

/// Write the verdict table (condition, params, partial_sum, tail_slope, verdict).
pub fn write_verdict_table<W: Write>(diags: &[SeriesDiagnostic], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["condition", "params", "partial_sum", "tail_slope", "verdict"])?;
    for d in diags {
        wr.write_record([
            d.condition.clone(),
            d.params.clone(),
            format!("{:e}", d.partial_sum()),
            d.tail_slope.map_or(String::new(), |s| format!("{s:.6}")),
            d.verdict.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// DIVERGENT stops the caller; anything else becomes an annotation.
pub fn gate(diag: &SeriesDiagnostic) -> Result<String> {
    let slope = diag.tail_slope.map_or("n/a".to_string(), |s| format!("{s:.4}"));
    match diag.verdict {
        SeriesVerdict::Divergent => {
            Err(MartlabError::GateFailed { condition: diag.condition.clone(), verdict: diag.verdict.to_string() })
        }
        v => Ok(format!("gate {} ({}): {v}, tail slope {slope}", diag.condition, diag.params)),
    }
}

fn gate_length(n_max: usize) -> usize {
    n_max.clamp(64, 512)
}

pub(crate) fn gate_wasserstein(model: &ModelSpec, p: f64, r: f64, n_max: usize, ctx: &McContext<'_>) -> Result<Vec<String>> {
    let n = gate_length(n_max);
    let first = evaluate_condition(model, &ConditionSpec { n_max: n, ..ConditionSpec::new(ConditionName::Cond1Wasser, p) }, ctx)?;
    let second = if r <= 2.0 {
        ConditionSpec { n_max: n, ..ConditionSpec::new(ConditionName::Cond2WasserRLe2, p) }
    } else {
        ConditionSpec { n_max: n, r: Some(r), ..ConditionSpec::new(ConditionName::Cond2WasserRGt2, p) }
    };
    let second = evaluate_condition(model, &second, ctx)?;
    Ok(vec![gate(&first)?, gate(&second)?])
}

pub(crate) fn gate_cvm(model: &ModelSpec, setup: &CvmSetup, ctx: &McContext<'_>) -> Result<Vec<String>> {
    let n = 64;
    let profile = tau_profile(model, setup, n, ctx)?;
    let d = series_partial(&SeriesCondition::new(ConditionName::CondCvm, setup.p, profile), n)?;
    Ok(vec![gate(&d)?])
}

pub(crate) fn gate_mw(model: &ModelSpec, n_max: usize, ctx: &McContext<'_>) -> Result<Vec<String>> {
    let spec = ConditionSpec { n_max: gate_length(n_max), ..ConditionSpec::new(ConditionName::Mw, 2.0) };
    Ok(vec![gate(&evaluate_condition(model, &spec, ctx)?)?])
}

pub(crate) fn gate_mw1(model: &ModelSpec, p: f64, psi: Psi, n_max: usize, ctx: &McContext<'_>) -> Result<Vec<String>> {
    let spec = ConditionSpec { n_max: gate_length(n_max), psi, ..ConditionSpec::new(ConditionName::Mw1Psi, p) };
    Ok(vec![gate(&evaluate_condition(model, &spec, ctx)?)?])
}
