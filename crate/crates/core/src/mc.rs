//! Deterministic replicate-parallel Monte Carlo.
//!
//! Workers evaluate replicate indices into an indexed buffer; every reduction
//! runs afterwards on one thread in index order, so results do not depend on
//! the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MartlabError, Result};
use crate::special::CompensatedSum;

/// Replicates evaluated between stopping-rule checks.
pub const MC_BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McBudget {
    pub replicates: u64,
    pub target_rel_stderr: f64,
}

impl Default for McBudget {
    fn default() -> Self {
        Self { replicates: 100_000, target_rel_stderr: 0.02 }
    }
}

impl McBudget {
    pub fn fixed(replicates: u64) -> Self {
        Self { replicates, target_rel_stderr: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(MartlabError::InvalidArgument("budget needs at least 2 replicates".into()));
        }
        if !(self.target_rel_stderr >= 0.0) {
            return Err(MartlabError::InvalidArgument("target relative stderr must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Worker pool with a fixed thread count.
pub struct Executor {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers).finish()
    }
}

impl Executor {
    /// `workers = 0` picks the available parallelism.
    pub fn new(workers: usize) -> Result<Self> {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            workers
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| MartlabError::Config(format!("cannot build worker pool: {e}")))?;
        Ok(Self { pool, workers })
    }

    pub fn serial() -> Self {
        Self::new(1).expect("single-thread pool")
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluate `f` at every index of `range`, returned in index order.
    pub fn map<T, F>(&self, range: std::ops::Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| range.into_par_iter().map(&f).collect())
    }

    /// Fallible variant of [`Executor::map`]; the first error by index wins.
    pub fn try_map<T, F>(&self, range: std::ops::Range<u64>, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        let out: Vec<Result<T>> = self.map(range, f);
        out.into_iter().collect()
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

impl MeanEstimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len();
        if n == 0 {
            return Self::default();
        }
        let mut s = CompensatedSum::default();
        x.iter().for_each(|&v| s.add(v));
        let mean = s.value() / n as f64;
        let mut ss = CompensatedSum::default();
        x.iter().for_each(|&v| ss.add((v - mean) * (v - mean)));
        let var = if n > 1 { ss.value() / (n - 1) as f64 } else { 0.0 };
        Self { mean, stderr: (var / n as f64).sqrt(), count: n as u64 }
    }

    pub fn variance(&self) -> f64 {
        self.stderr * self.stderr * self.count as f64
    }
}

/// Lp-norm estimate (E|Y|^p)^{1/p} with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LpEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicates: u64,
    pub budget_exhausted: bool,
}

impl LpEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, replicates: 0, budget_exhausted: false }
    }

    /// From samples of Y.
    pub fn from_samples(y: &[f64], p: f64) -> Self {
        let powers: Vec<f64> = y.iter().map(|v| v.abs().powf(p)).collect();
        Self::from_moment(MeanEstimate::from_samples(&powers), p)
    }

    /// From an estimate of E|Y|^p.
    pub fn from_moment(m: MeanEstimate, p: f64) -> Self {
        if m.mean <= 0.0 {
            return Self { value: 0.0, stderr: 0.0, replicates: m.count, budget_exhausted: false };
        }
        let value = m.mean.powf(1.0 / p);
        let stderr = value / (p * m.mean) * m.stderr;
        Self { value, stderr, replicates: m.count, budget_exhausted: false }
    }

    pub fn rel_stderr(&self) -> f64 {
        if self.value > 0.0 {
            self.stderr / self.value
        } else {
            0.0
        }
    }
}

/// Draw Y(replicate) in fixed batches until the Lp estimate reaches the
/// budget's relative precision or its replicate cap.
pub fn lp_norm_adaptive<F>(exec: &Executor, budget: &McBudget, p: f64, f: F) -> Result<LpEstimate>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    budget.validate()?;
    let mut powers: Vec<f64> = Vec::new();
    let mut done = 0u64;
    loop {
        let end = (done + MC_BATCH).min(budget.replicates);
        let batch = exec.try_map(done..end, |r| f(r).map(|y| y.abs().powf(p)))?;
        powers.extend(batch);
        done = end;
        let est = LpEstimate::from_moment(MeanEstimate::from_samples(&powers), p);
        if est.rel_stderr() <= budget.target_rel_stderr {
            return Ok(est);
        }
        if done >= budget.replicates {
            return Ok(LpEstimate { budget_exhausted: true, ..est });
        }
    }
}

/// Executor, base seed and budget bundled for Monte Carlo oracles.
#[derive(Debug, Clone, Copy)]
pub struct McContext<'a> {
    pub exec: &'a Executor,
    pub seed: u64,
    pub budget: McBudget,
}

impl<'a> McContext<'a> {
    pub fn new(exec: &'a Executor, seed: u64, budget: McBudget) -> Self {
        Self { exec, seed, budget }
    }

    pub fn with_budget(self, budget: McBudget) -> Self {
        Self { budget, ..self }
    }

    /// Same executor and budget, different seed (for independent sub-experiments).
    pub fn reseeded(self, salt: u64) -> Self {
        Self { seed: crate::rng::splitmix64(self.seed ^ crate::rng::splitmix64(salt)), ..self }
    }
}

/// Running mean and variance (Welford), fed in replicate order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn estimate(&self) -> MeanEstimate {
        let var = if self.count > 1 { self.m2 / (self.count - 1) as f64 } else { 0.0 };
        MeanEstimate { mean: self.mean, stderr: (var / self.count.max(1) as f64).sqrt(), count: self.count }
    }
}

/// Joint Lp-norm estimates of a vector-valued Y(replicate); stops when every
/// nonzero component reaches the target precision or the cap is hit.
pub fn lp_norm_vector_adaptive<F>(ctx: &McContext<'_>, dim: usize, p: f64, f: F) -> Result<Vec<LpEstimate>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync + Send,
{
    ctx.budget.validate()?;
    let mut acc = vec![Welford::default(); dim];
    let mut done = 0u64;
    loop {
        let end = (done + MC_BATCH).min(ctx.budget.replicates);
        let batch = ctx.exec.try_map(done..end, &f)?;
        for y in &batch {
            if y.len() != dim {
                return Err(MartlabError::SizeMismatch { left: y.len(), right: dim });
            }
            for (a, v) in acc.iter_mut().zip(y) {
                a.push(v.abs().powf(p));
            }
        }
        done = end;
        let est: Vec<LpEstimate> = acc.iter().map(|a| LpEstimate::from_moment(a.estimate(), p)).collect();
        let worst = est.iter().map(|e| e.rel_stderr()).fold(0.0, f64::max);
        if worst <= ctx.budget.target_rel_stderr {
            return Ok(est);
        }
        if done >= ctx.budget.replicates {
            let target = ctx.budget.target_rel_stderr;
            return Ok(est
                .into_iter()
                .map(|e| LpEstimate { budget_exhausted: e.rel_stderr() > target, ..e })
                .collect());
        }
    }
}

/// Mean of Y(replicate) over exactly `reps` replicates.
pub fn mean_fixed<F>(exec: &Executor, reps: u64, f: F) -> Result<MeanEstimate>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    let y = exec.try_map(0..reps, f)?;
    Ok(MeanEstimate::from_samples(&y))
}
