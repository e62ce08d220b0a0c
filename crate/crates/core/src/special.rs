//! Scalar special functions and quadrature shared across modules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail 1 - Φ(z), accurate far into the tail.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}

/// ‖N(0,1)‖_p = (2^{p/2} Γ((p+1)/2) / √π)^{1/p}, memoized per p.
pub fn gaussian_abs_moment_norm(p: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&p.to_bits()) {
        return *v;
    }
    let log_moment = 0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0)) - 0.5 * PI.ln();
    let v = (log_moment / p).exp();
    cache.lock().unwrap().insert(p.to_bits(), v);
    v
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = order as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(20))
}

/// Composite 20-point Gauss–Legendre over consecutive breakpoints.
pub fn integrate_panels(breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gl20();
    breaks
        .windows(2)
        .map(|ab| {
            let (a, b) = (ab[0], ab[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            half * x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>()
        })
        .sum()
}

/// E|Z² − 1|^s for Z ~ N(0,1), by panel quadrature graded toward the kink at |z| = 1.
pub fn chi2_centered_abs_moment(s: f64) -> f64 {
    let mut breaks = Vec::with_capacity(100);
    for k in 0..=45 {
        breaks.push(1.0 - 0.5f64.powi(k));
    }
    breaks.push(1.0);
    for k in (0..=45).rev() {
        breaks.push(1.0 + 0.5f64.powi(k));
    }
    for k in 1..=24 {
        breaks.push(2.0 + 0.5 * k as f64);
    }
    2.0 * integrate_panels(&breaks, |z| (z * z - 1.0).abs().powf(s) * normal_pdf(z))
}

/// Σ_{k ≥ from} k^{-s} for s > 1 (direct head plus Euler–Maclaurin tail).
pub fn zeta_tail(from: u64, s: f64) -> f64 {
    debug_assert!(s > 1.0);
    let from = from.max(1);
    const SWITCH: u64 = 64;
    let mut head = 0.0;
    let mut k = from;
    while k < SWITCH {
        head += (k as f64).powf(-s);
        k += 1;
    }
    let n = k as f64;
    let t = n.powf(-s);
    let tail = n * t / (s - 1.0) + 0.5 * t + s * t / (12.0 * n)
        - s * (s + 1.0) * (s + 2.0) * t / (720.0 * n.powi(3))
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * t / (30240.0 * n.powi(5));
    head + tail
}

/// Two-sided Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}


/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Prefix sums with compensation: out[k] = x[0] + ... + x[k].
pub fn compensated_prefix_sums(x: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::default();
    x.iter()
        .map(|&v| {
            acc.add(v);
            acc.value()
        })
        .collect()
}
