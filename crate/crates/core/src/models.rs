//! Catalog of stationary adapted processes `X_i = X_0 ∘ θ^i` with exactly
//! computable projective structure, and trajectory generation conditional
//! on an explicit past.
//!
//! Innovations and torus steps are drawn from counter-addressed streams keyed
//! by time index, so two models driven by the same innovations at the same
//! times (e.g. `Iid` and `Linear` with coefficients `(1, 0, ...)`) produce
//! identical trajectories for the same `(seed, replicate)`.

use serde::{Deserialize, Serialize};

use crate::error::{MartlabError, Result};
use crate::rng::{box_muller, unit_closed_open, unit_open_closed, CounterStream, Purpose};
use statrs::function::gamma::gamma;

use crate::special::{compensated_prefix_sums, gaussian_abs_moment_norm, integrate_panels, normal_cdf};

/// Default lag truncation J for infinite-order linear filters.
pub const DEFAULT_LAG: usize = 256;
/// Default Fourier band L for torus observables.
pub const DEFAULT_BAND: usize = 32;

/// (√5 − 1)/2, the badly approximable rotation used by the torus walk.
pub fn golden_step() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InnovationLaw {
    StandardNormal,
    /// Exp(rate) − 1/rate.
    CenteredExponential { rate: f64 },
    Rademacher,
    /// Uniform on [−halfwidth, halfwidth].
    CenteredUniform { halfwidth: f64 },
}

impl InnovationLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::CenteredExponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                Err(MartlabError::InvalidModel(format!("exponential rate must be positive, got {rate}")))
            }
            InnovationLaw::CenteredUniform { halfwidth } if !(halfwidth > 0.0 && halfwidth.is_finite()) => {
                Err(MartlabError::InvalidModel(format!("uniform halfwidth must be positive, got {halfwidth}")))
            }
            _ => Ok(()),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InnovationLaw::StandardNormal | InnovationLaw::Rademacher => 1.0,
            InnovationLaw::CenteredExponential { rate } => 1.0 / (rate * rate),
            InnovationLaw::CenteredUniform { halfwidth } => halfwidth * halfwidth / 3.0,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, InnovationLaw::StandardNormal)
    }

    /// Same family rescaled to unit variance.
    pub fn unit_variance(self) -> Self {
        match self {
            InnovationLaw::CenteredExponential { .. } => InnovationLaw::CenteredExponential { rate: 1.0 },
            InnovationLaw::CenteredUniform { .. } => InnovationLaw::CenteredUniform { halfwidth: 3f64.sqrt() },
            other => other,
        }
    }

    /// E|ε|^p.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match *self {
            InnovationLaw::StandardNormal => gaussian_abs_moment_norm(p).powf(p),
            InnovationLaw::Rademacher => 1.0,
            InnovationLaw::CenteredUniform { halfwidth } => halfwidth.powf(p) / (p + 1.0),
            InnovationLaw::CenteredExponential { rate } => {
                // E|E − 1|^p = ∫_0^1 (1−x)^p e^{−x} dx + e^{−1} Γ(p+1)
                let breaks: Vec<f64> = (0..=40).map(|k| 1.0 - 0.5f64.powi(k)).chain([1.0]).collect();
                let head = integrate_panels(&breaks, |x| (1.0 - x).powf(p) * (-x).exp());
                (head + (-1.0f64).exp() * gamma(p + 1.0)) / rate.powf(p)
            }
        }
    }

    /// ‖ε‖_p.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.abs_moment(p).powf(1.0 / p)
    }

    /// Draw from one stream slot.
    #[inline]
    pub fn draw(&self, a: u64, b: u64) -> f64 {
        match *self {
            InnovationLaw::StandardNormal => box_muller(a, b),
            InnovationLaw::CenteredExponential { rate } => (-unit_open_closed(a).ln() - 1.0) / rate,
            InnovationLaw::Rademacher => {
                if a >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            InnovationLaw::CenteredUniform { halfwidth } => halfwidth * (2.0 * unit_closed_open(a) - 1.0),
        }
    }

    /// Distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            InnovationLaw::StandardNormal => normal_cdf(t),
            InnovationLaw::CenteredExponential { rate } => {
                let x = t + 1.0 / rate;
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
            InnovationLaw::Rademacher => {
                if t < -1.0 {
                    0.0
                } else if t < 1.0 {
                    0.5
                } else {
                    1.0
                }
            }
            InnovationLaw::CenteredUniform { halfwidth } => ((t + halfwidth) / (2.0 * halfwidth)).clamp(0.0, 1.0),
        }
    }
}

/// Complex Fourier coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    #[inline]
    pub fn cis(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }
}

/// Evaluate the real trigonometric polynomial Σ_{0<|ℓ|≤L} c_ℓ e^{2πiℓx}
/// given c_1..c_L (Hermitian symmetry supplies negative frequencies).
#[inline]
pub fn trig_eval(coeffs: &[Complex], x: f64) -> f64 {
    let z = Complex::cis(std::f64::consts::TAU * x);
    let mut zl = z;
    let mut acc = 0.0;
    for c in coeffs {
        acc += c.re * zl.re - c.im * zl.im;
        zl = zl.mul(z);
    }
    2.0 * acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// X_i = Σ_{j=0}^{J} a_j ε_{i−j}.
    Linear { coeffs: Vec<f64>, innovation: InnovationLaw },
    /// X_i = φ X_{i−1} + σ_ε ε_i with Gaussian ε.
    Ar1 { phi: f64, innovation_sd: f64 },
    /// X_i = f(ξ_i), ξ_i = ξ_{i−1} ± step (mod 1); `fourier` holds c_1..c_L.
    TorusWalk { step: f64, fourier: Vec<Complex> },
    /// X_i = ε_i.
    Iid { innovation: InnovationLaw },
}

impl ModelSpec {
    pub fn ar1(phi: f64, innovation_sd: f64) -> Self {
        ModelSpec::Ar1 { phi, innovation_sd }
    }

    pub fn iid(innovation: InnovationLaw) -> Self {
        ModelSpec::Iid { innovation }
    }

    pub fn linear(coeffs: Vec<f64>, innovation: InnovationLaw) -> Self {
        ModelSpec::Linear { coeffs, innovation }
    }

    /// Linear filter a_j = g(j), j = 0..=lag.
    pub fn linear_from_fn(lag: usize, innovation: InnovationLaw, g: impl Fn(usize) -> f64) -> Self {
        ModelSpec::Linear { coeffs: (0..=lag).map(g).collect(), innovation }
    }

    /// Torus walk with the golden step and coefficients c_1..c_L.
    pub fn torus(fourier: Vec<Complex>) -> Self {
        ModelSpec::TorusWalk { step: golden_step(), fourier }
    }

    /// Torus walk from the full coefficient table c_{−L}..c_L, checking
    /// centering (c_0 = 0) and Hermitian symmetry.
    pub fn torus_from_full(step: f64, full: &[Complex]) -> Result<Self> {
        if full.len() % 2 == 0 {
            return Err(MartlabError::InvalidModel("full coefficient table must have odd length".into()));
        }
        let band = full.len() / 2;
        if full[band] != Complex::default() {
            return Err(MartlabError::InvalidModel("c_0 must vanish (centered observable)".into()));
        }
        for l in 1..=band {
            let (pos, neg) = (full[band + l], full[band - l]);
            if (pos.re - neg.re).abs() > 1e-15 || (pos.im + neg.im).abs() > 1e-15 {
                return Err(MartlabError::InvalidModel(format!("coefficients at ±{l} are not conjugate")));
            }
        }
        let model = ModelSpec::TorusWalk { step, fourier: full[band + 1..].to_vec() };
        model.validate()?;
        Ok(model)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Linear { .. } => "linear",
            ModelSpec::Ar1 { .. } => "ar1",
            ModelSpec::TorusWalk { .. } => "torus_walk",
            ModelSpec::Iid { .. } => "iid",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Linear { coeffs, innovation } => {
                innovation.validate()?;
                if coeffs.is_empty() {
                    return Err(MartlabError::InvalidModel("linear filter needs at least a_0".into()));
                }
                if coeffs.iter().any(|a| !a.is_finite()) {
                    return Err(MartlabError::InvalidModel("non-finite filter coefficient".into()));
                }
                Ok(())
            }
            ModelSpec::Ar1 { phi, innovation_sd } => {
                if !(phi.abs() < 1.0) {
                    return Err(MartlabError::InvalidModel(format!("AR(1) needs |phi| < 1, got {phi}")));
                }
                if !(*innovation_sd > 0.0 && innovation_sd.is_finite()) {
                    return Err(MartlabError::InvalidModel("AR(1) innovation sd must be positive".into()));
                }
                Ok(())
            }
            ModelSpec::TorusWalk { step, fourier } => {
                if !(*step > 0.0 && *step < 1.0) {
                    return Err(MartlabError::InvalidModel(format!("torus step must lie in (0,1), got {step}")));
                }
                if fourier.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                    return Err(MartlabError::InvalidModel("non-finite Fourier coefficient".into()));
                }
                Ok(())
            }
            ModelSpec::Iid { innovation } => innovation.validate(),
        }
    }

    /// Coefficients a_0..a_J when the model is a (finite) linear filter of iid innovations.
    pub fn filter(&self) -> Option<(&[f64], InnovationLaw)> {
        match self {
            ModelSpec::Linear { coeffs, innovation } => Some((coeffs, *innovation)),
            ModelSpec::Iid { innovation } => Some((&[1.0], *innovation)),
            _ => None,
        }
    }

    /// Whether every finite-dimensional law is Gaussian.
    pub fn is_gaussian(&self) -> bool {
        match self {
            ModelSpec::Linear { innovation, .. } | ModelSpec::Iid { innovation } => innovation.is_gaussian(),
            ModelSpec::Ar1 { .. } => true,
            ModelSpec::TorusWalk { .. } => false,
        }
    }

    /// Eigenvalues λ_ℓ = cos(2πℓa) of the torus kernel, ℓ = 1..L.
    pub fn torus_eigenvalues(&self) -> Option<Vec<f64>> {
        match self {
            ModelSpec::TorusWalk { step, fourier } => {
                Some((1..=fourier.len()).map(|l| (std::f64::consts::TAU * l as f64 * step).cos()).collect())
            }
            _ => None,
        }
    }

    /// The model for −X with the same driving randomness.
    pub fn negated(&self) -> Result<Self> {
        match self {
            ModelSpec::Linear { coeffs, innovation } => {
                Ok(ModelSpec::Linear { coeffs: coeffs.iter().map(|a| -a).collect(), innovation: *innovation })
            }
            ModelSpec::Iid { innovation } => Ok(ModelSpec::Linear { coeffs: vec![-1.0], innovation: *innovation }),
            ModelSpec::TorusWalk { step, fourier } => {
                Ok(ModelSpec::TorusWalk { step: *step, fourier: fourier.iter().map(|c| c.scale(-1.0)).collect() })
            }
            ModelSpec::Ar1 { .. } => Err(MartlabError::Unsupported("negation of AR(1) with shared seeds".into())),
        }
    }

    /// Var(X_0).
    pub fn variance(&self) -> f64 {
        self.autocov(0)
    }

    /// Cov(X_0, X_k).
    pub fn autocov(&self, k: usize) -> f64 {
        match self {
            ModelSpec::Linear { coeffs, innovation } => {
                let s2 = innovation.variance();
                s2 * coeffs.iter().zip(coeffs.iter().skip(k)).map(|(a, b)| a * b).sum::<f64>()
            }
            ModelSpec::Iid { innovation } => {
                if k == 0 {
                    innovation.variance()
                } else {
                    0.0
                }
            }
            ModelSpec::Ar1 { phi, innovation_sd } => {
                phi.powi(k as i32) * innovation_sd * innovation_sd / (1.0 - phi * phi)
            }
            ModelSpec::TorusWalk { fourier, .. } => {
                let lambdas = self.torus_eigenvalues().unwrap();
                fourier.iter().zip(&lambdas).map(|(c, l)| 2.0 * c.norm_sqr() * l.powi(k as i32)).sum()
            }
        }
    }

    /// Long-run variance σ² = Σ_{k∈ℤ} Cov(X_0, X_k).
    pub fn sigma2(&self) -> f64 {
        match self {
            ModelSpec::Linear { coeffs, innovation } => {
                let s: f64 = coeffs.iter().sum();
                innovation.variance() * s * s
            }
            ModelSpec::Iid { innovation } => innovation.variance(),
            ModelSpec::Ar1 { phi, innovation_sd } => innovation_sd * innovation_sd / ((1.0 - phi) * (1.0 - phi)),
            ModelSpec::TorusWalk { fourier, .. } => {
                let lambdas = self.torus_eigenvalues().unwrap();
                fourier.iter().zip(&lambdas).map(|(c, l)| 2.0 * c.norm_sqr() * (1.0 + l) / (1.0 - l)).sum()
            }
        }
    }

    /// v_n = Var(S_n) = E(S_n²).
    pub fn var_partial_sum(&self, n: usize) -> f64 {
        let nf = n as f64;
        let geometric = |lambda: f64| {
            // Σ_{i,j=1}^n λ^{|i−j|}
            if lambda == 1.0 {
                return nf * nf;
            }
            nf * (1.0 + lambda) / (1.0 - lambda) - 2.0 * lambda * (1.0 - lambda.powi(n as i32)) / ((1.0 - lambda) * (1.0 - lambda))
        };
        match self {
            ModelSpec::Ar1 { phi, .. } => self.variance() * geometric(*phi),
            ModelSpec::TorusWalk { fourier, .. } => {
                let lambdas = self.torus_eigenvalues().unwrap();
                fourier.iter().zip(&lambdas).map(|(c, l)| 2.0 * c.norm_sqr() * geometric(*l)).sum()
            }
            _ => {
                let max_lag = match self {
                    ModelSpec::Linear { coeffs, .. } => coeffs.len() - 1,
                    _ => 0,
                };
                let mut v = nf * self.autocov(0);
                for k in 1..n.min(max_lag + 1) {
                    v += 2.0 * (nf - k as f64) * self.autocov(k);
                }
                v
            }
        }
    }

    /// Standard deviation of the stationary AR(1) level.
    fn ar1_stationary_sd(phi: f64, sd: f64) -> f64 {
        sd / (1.0 - phi * phi).sqrt()
    }
}

/// A realization of the σ-field F_0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PastState {
    /// window[m] = ε_{−m}; used by `Linear` and `Iid`.
    Innovations { window: Vec<f64> },
    /// X_0 and, when known, ε_0 = X_0 − φ X_{−1}.
    Ar1 { x0: f64, eps0: Option<f64> },
    /// Positions ξ_{−1}, ξ_0 on [0, 1).
    Torus { xi_prev: f64, xi0: f64 },
}

impl PastState {
    pub fn kind(&self) -> &'static str {
        match self {
            PastState::Innovations { .. } => "innovations",
            PastState::Ar1 { .. } => "ar1",
            PastState::Torus { .. } => "torus",
        }
    }

    /// Check the variant matches the model.
    pub fn check_for(&self, model: &ModelSpec) -> Result<()> {
        let ok = matches!(
            (model, self),
            (ModelSpec::Linear { .. } | ModelSpec::Iid { .. }, PastState::Innovations { .. })
                | (ModelSpec::Ar1 { .. }, PastState::Ar1 { .. })
                | (ModelSpec::TorusWalk { .. }, PastState::Torus { .. })
        );
        if !ok {
            return Err(MartlabError::PastMismatch { model: model.name(), past: self.kind() });
        }
        if let PastState::Torus { xi_prev, xi0 } = self {
            if !(0.0..1.0).contains(xi_prev) || !(0.0..1.0).contains(xi0) {
                return Err(MartlabError::InvalidArgument("torus positions must lie in [0,1)".into()));
            }
        }
        Ok(())
    }

    /// Number of stored innovations (linear pasts); `usize::MAX` for Markov pasts.
    pub fn depth(&self) -> usize {
        match self {
            PastState::Innovations { window } => window.len(),
            _ => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PastMode {
    FreshStationary,
    Fixed(PastState),
}

/// Model-specific history kept so D ∘ θ^k can be evaluated along the path.
#[derive(Debug, Clone, PartialEq)]
pub enum PathHistory {
    /// eps[i] = ε_{first_time + i}, through time n.
    Innovations { first_time: i64, eps: Vec<f64> },
    /// levels = X_0..X_n, eps = ε_1..ε_n (scaled by σ_ε).
    Ar1 { levels: Vec<f64>, eps: Vec<f64> },
    /// positions = ξ_{−1}, ξ_0, ..., ξ_n.
    Torus { positions: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub past: PastState,
    /// X_1..X_n.
    pub values: Vec<f64>,
    /// S_1..S_n.
    pub partial_sums: Vec<f64>,
    pub history: PathHistory,
    pub seed: u64,
    pub replicate: u64,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// S_k with S_0 = 0.
    pub fn partial_sum(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.partial_sums[k - 1]
        }
    }

    /// The past state at time j (F_j realized along the path), 0 ≤ j ≤ n.
    pub fn past_at(&self, j: usize) -> PastState {
        match &self.history {
            PathHistory::Innovations { first_time, eps } => {
                let top = (j as i64 - first_time) as usize;
                PastState::Innovations { window: eps[..=top].iter().rev().copied().collect() }
            }
            PathHistory::Ar1 { levels, eps } => {
                let eps0 = if j == 0 {
                    match &self.past {
                        PastState::Ar1 { eps0, .. } => *eps0,
                        _ => None,
                    }
                } else {
                    Some(eps[j - 1])
                };
                PastState::Ar1 { x0: levels[j], eps0 }
            }
            PathHistory::Torus { positions } => PastState::Torus { xi_prev: positions[j], xi0: positions[j + 1] },
        }
    }
}

#[inline]
fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Draw the stationary past used by `PastMode::FreshStationary`.
pub fn draw_stationary_past(model: &ModelSpec, seed: u64, replicate: u64) -> Result<PastState> {
    model.validate()?;
    Ok(match model {
        ModelSpec::Linear { .. } | ModelSpec::Iid { .. } => {
            let (coeffs, law) = model.filter().unwrap();
            let lag = coeffs.len() - 1;
            let mut s = CounterStream::new(seed, Purpose::Innovations, replicate);
            s.seek(-(lag as i64));
            let mut window: Vec<f64> = (0..=lag)
                .map(|_| {
                    let (a, b) = s.next_slot();
                    law.draw(a, b)
                })
                .collect();
            window.reverse();
            PastState::Innovations { window }
        }
        ModelSpec::Ar1 { phi, innovation_sd } => {
            let mut s = CounterStream::new(seed, Purpose::Innovations, replicate);
            s.seek(-1);
            let x_prev = ModelSpec::ar1_stationary_sd(*phi, *innovation_sd) * s.normal_slot();
            let eps0 = innovation_sd * s.normal_slot();
            PastState::Ar1 { x0: phi * x_prev + eps0, eps0: Some(eps0) }
        }
        ModelSpec::TorusWalk { step, .. } => {
            let mut p = CounterStream::new(seed, Purpose::StationaryPast, replicate);
            let xi0 = unit_closed_open(p.next_slot().0);
            let mut steps = CounterStream::new(seed, Purpose::TorusSteps, replicate);
            let up = steps.next_slot().0 >> 63 == 1;
            let xi_prev = wrap_unit(if up { xi0 - step } else { xi0 + step });
            PastState::Torus { xi_prev, xi0 }
        }
    })
}

/// Generate X_1..X_n conditional on the past.
pub fn sample_path(model: &ModelSpec, n: usize, past: &PastMode, seed: u64, replicate: u64) -> Result<PathSample> {
    model.validate()?;
    if n == 0 {
        return Err(MartlabError::InvalidArgument("path length must be positive".into()));
    }
    let past = match past {
        PastMode::FreshStationary => draw_stationary_past(model, seed, replicate)?,
        PastMode::Fixed(state) => {
            state.check_for(model)?;
            state.clone()
        }
    };
    let (values, history) = match model {
        ModelSpec::Linear { .. } | ModelSpec::Iid { .. } => {
            let (coeffs, law) = model.filter().unwrap();
            let lag = coeffs.len() - 1;
            let first_time = -(lag as i64);
            let mut s = CounterStream::new(seed, Purpose::Innovations, replicate);
            s.seek(first_time);
            let mut eps: Vec<f64> = (0..=(lag + n))
                .map(|_| {
                    let (a, b) = s.next_slot();
                    law.draw(a, b)
                })
                .collect();
            // Known past innovations override the conditional draws of the pre-past.
            if let PastState::Innovations { window } = &past {
                for (m, &e) in window.iter().enumerate().take(lag + 1) {
                    eps[lag - m] = e;
                }
            }
            let values: Vec<f64> = match model {
                ModelSpec::Iid { .. } => eps[lag + 1..].to_vec(),
                _ => (1..=n)
                    .map(|i| {
                        let t = lag + i;
                        let mut acc = coeffs[0] * eps[t];
                        for (j, a) in coeffs.iter().enumerate().skip(1) {
                            acc += a * eps[t - j];
                        }
                        acc
                    })
                    .collect(),
            };
            (values, PathHistory::Innovations { first_time, eps })
        }
        ModelSpec::Ar1 { phi, innovation_sd } => {
            let x0 = match &past {
                PastState::Ar1 { x0, .. } => *x0,
                _ => unreachable!(),
            };
            let mut s = CounterStream::new(seed, Purpose::Innovations, replicate);
            s.seek(1);
            let mut levels = Vec::with_capacity(n + 1);
            let mut eps = Vec::with_capacity(n);
            levels.push(x0);
            let mut x = x0;
            for _ in 0..n {
                let e = innovation_sd * s.normal_slot();
                x = phi * x + e;
                eps.push(e);
                levels.push(x);
            }
            (levels[1..].to_vec(), PathHistory::Ar1 { levels, eps })
        }
        ModelSpec::TorusWalk { step, fourier } => {
            let (xi_prev, xi0) = match &past {
                PastState::Torus { xi_prev, xi0 } => (*xi_prev, *xi0),
                _ => unreachable!(),
            };
            let mut s = CounterStream::new(seed, Purpose::TorusSteps, replicate);
            s.seek(1);
            let mut positions = Vec::with_capacity(n + 2);
            positions.push(xi_prev);
            positions.push(xi0);
            let mut xi = xi0;
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                let up = s.next_slot().0 >> 63 == 1;
                xi = wrap_unit(if up { xi + step } else { xi - step });
                positions.push(xi);
                values.push(trig_eval(fourier, xi));
            }
            (values, PathHistory::Torus { positions })
        }
    };
    let partial_sums = compensated_prefix_sums(&values);
    Ok(PathSample { past, values, partial_sums, history, seed, replicate })
}
