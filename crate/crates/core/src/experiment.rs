//! Config-driven experiment runner.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::{rate_experiment, Construction, TruncationParams};
use crate::conditions::{condmdprho_check, evaluate_condition, write_verdict_table, ConditionName, ConditionSpec, Psi, SeriesDiagnostic, SeriesVerdict};
use crate::error::{MartlabError, Result};
use crate::inequalities::{doob_experiment, dyadic_chain_bound, ergodic_rate_experiment};
use crate::limit::{cvm_rate_experiment, mdp_experiment, wasserstein_rate_experiment, CvmSetup, Marginal, Measure};
use crate::mc::{Executor, McBudget, McContext, MeanEstimate};
use crate::models::{ModelSpec, PastMode, PastState};
use crate::projective::mixing_rho;
use crate::quenched::{quenched_fclt, resquen_decay, PathFunctional};
use crate::report::{ExperimentReport, ReportRow, Rule, POLICY};
use crate::rng::{CounterStream, Purpose};

/// Validate a grid of sample sizes: nonempty, positive, strictly increasing.
pub fn check_grid(grid: &[usize]) -> Result<Vec<usize>> {
    if grid.is_empty() {
        return Err(MartlabError::InvalidArgument("empty n grid".into()));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MartlabError::InvalidArgument(format!("n grid must be positive and increasing: {grid:?}")));
    }
    Ok(grid.to_vec())
}

/// 2^lo, 2^(lo+1), ..., 2^hi.
pub fn dyadic_grid(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

/// Either an explicit list or `{ dyadic = [lo, hi] }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<usize>),
    Dyadic { dyadic: [u32; 2] },
}

impl GridSpec {
    pub fn dyadic(lo: u32, hi: u32) -> Self {
        GridSpec::Dyadic { dyadic: [lo, hi] }
    }

    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            GridSpec::List(v) => check_grid(v),
            GridSpec::Dyadic { dyadic: [lo, hi] } => {
                if lo > hi || *hi > 40 {
                    return Err(MartlabError::Config(format!("dyadic grid bounds [{lo}, {hi}] are invalid")));
                }
                Ok(dyadic_grid(*lo, *hi))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub n_grid: GridSpec,
    pub replicates: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self { n_grid: GridSpec::dyadic(4, 12), replicates: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxRateParams {
    pub p: f64,
    pub n_grid: GridSpec,
    pub replicates: u64,
    pub construction: Construction,
}

impl Default for ApproxRateParams {
    fn default() -> Self {
        Self { p: 2.0, n_grid: GridSpec::dyadic(4, 12), replicates: 100_000, construction: Construction::Cesaro }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchedParams {
    /// Fixed past; the model's rest state when absent.
    pub past: Option<PastState>,
    pub n_grid: GridSpec,
    pub replicates: u64,
    pub functionals: Vec<PathFunctional>,
    pub clip: f64,
}

impl Default for QuenchedParams {
    fn default() -> Self {
        Self {
            past: None,
            n_grid: GridSpec::List(vec![4096]),
            replicates: 100_000,
            functionals: PathFunctional::ALL.to_vec(),
            clip: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResquenParams {
    pub past: Option<PastState>,
    pub n_grid: GridSpec,
    pub replicates: u64,
    pub truncation: Option<TruncationParams>,
}

impl Default for ResquenParams {
    fn default() -> Self {
        Self { past: None, n_grid: GridSpec::dyadic(6, 12), replicates: 10_000, truncation: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpParams {
    pub n: usize,
    pub r_grid: Vec<f64>,
    pub replicates: u64,
}

impl Default for MdpParams {
    fn default() -> Self {
        Self { n: 1024, r_grid: vec![1.0, 1.5, 2.0, 2.5, 3.0], replicates: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WassersteinParams {
    pub p: f64,
    pub r: f64,
    pub n_grid: GridSpec,
    pub replicates: u64,
}

impl Default for WassersteinParams {
    fn default() -> Self {
        Self { p: 2.5, r: 2.0, n_grid: GridSpec::dyadic(6, 12), replicates: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvmParams {
    pub measure: Measure,
    pub p: f64,
    pub n_grid: GridSpec,
    pub paths: u64,
    pub nodes: usize,
}

impl Default for CvmParams {
    fn default() -> Self {
        Self { measure: Measure::Df, p: 1.5, n_grid: GridSpec::dyadic(6, 12), paths: 200, nodes: crate::limit::cvm::DEFAULT_NODES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoParams {
    pub p: f64,
    pub r: f64,
    /// ρ(2^k) for k = 0..=k_max.
    #[serde(default = "default_rho_k")]
    pub k_max: u32,
}

fn default_rho_k() -> u32 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsParams {
    pub conditions: Vec<ConditionSpec>,
    pub rho: Option<RhoParams>,
}

impl Default for ConditionsParams {
    fn default() -> Self {
        Self { conditions: vec![ConditionSpec::new(ConditionName::Mw, 2.0)], rho: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InequalitiesParams {
    pub past: Option<PastState>,
    pub r_values: Vec<u32>,
    pub replicates: u64,
    pub chain_sequences: u64,
    pub chain_r_max: u32,
    pub chain_p: Vec<f64>,
}

impl Default for InequalitiesParams {
    fn default() -> Self {
        Self {
            past: None,
            r_values: vec![2, 4, 6],
            replicates: 100_000,
            chain_sequences: 1000,
            chain_r_max: 10,
            chain_p: vec![1.0, 1.5, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicRateParams {
    pub p: f64,
    pub psi: Psi,
    pub n_grid: GridSpec,
    pub paths: u64,
}

impl Default for ErgodicRateParams {
    fn default() -> Self {
        Self { p: 1.5, psi: Psi::One, n_grid: GridSpec::dyadic(4, 14), paths: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate(SimulateParams),
    #[serde(alias = "rate_experiment")]
    ApproxRate(ApproxRateParams),
    Quenched(QuenchedParams),
    Resquen(ResquenParams),
    #[serde(alias = "mdp_ratio")]
    Mdp(MdpParams),
    Wasserstein(WassersteinParams),
    Cvm(CvmParams),
    Conditions(ConditionsParams),
    Inequalities(InequalitiesParams),
    ErgodicRate(ErgodicRateParams),
}

impl Default for ExperimentKind {
    fn default() -> Self {
        ExperimentKind::Simulate(SimulateParams::default())
    }
}

impl ExperimentKind {
    pub const NAMES: [&'static str; 10] =
        ["simulate", "approx_rate", "quenched", "resquen", "mdp", "wasserstein", "cvm", "conditions", "inequalities", "ergodic_rate"];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate(_) => "simulate",
            ExperimentKind::ApproxRate(_) => "approx_rate",
            ExperimentKind::Quenched(_) => "quenched",
            ExperimentKind::Resquen(_) => "resquen",
            ExperimentKind::Mdp(_) => "mdp",
            ExperimentKind::Wasserstein(_) => "wasserstein",
            ExperimentKind::Cvm(_) => "cvm",
            ExperimentKind::Conditions(_) => "conditions",
            ExperimentKind::Inequalities(_) => "inequalities",
            ExperimentKind::ErgodicRate(_) => "ergodic_rate",
        }
    }

    /// Default parameters for a kind name (dashes accepted).
    pub fn default_for(name: &str) -> Result<Self> {
        let v = toml::Value::Table(toml::map::Map::from_iter([("kind".to_string(), toml::Value::String(name.replace('-', "_")))]));
        v.try_into().map_err(|e: toml::de::Error| MartlabError::Config(format!("unknown experiment kind {name:?}: {e}")))
    }
}

fn default_model() -> ModelSpec {
    ModelSpec::ar1(0.5, 1.0)
}

fn default_workers() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("martlab-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default)]
    pub experiment: ExperimentKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { seed: 0, workers: 1, out_dir: default_out_dir(), model: default_model(), experiment: ExperimentKind::default() }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| MartlabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MartlabError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(MartlabError::Config("workers must be at least 1".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    /// Seed precedence: explicit override, then the `MARTLAB_SEED` value, then the config.
    pub fn resolve_seed(&mut self, cli: Option<u64>, env: Option<&str>) -> Result<()> {
        if let Some(s) = cli {
            self.seed = s;
        } else if let Some(e) = env {
            self.seed = e.trim().parse().map_err(|_| MartlabError::Config(format!("MARTLAB_SEED is not a u64: {e:?}")))?;
        }
        Ok(())
    }

    /// The config as embedded in report bodies: everything that determines results.
    pub fn echo(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("workers");
            obj.remove("out_dir");
        }
        Ok(v)
    }

    /// SHA-256 of the canonical echo.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(serde_json::to_vec(&self.echo()?)?);
        let mut s = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(s, "{b:02x}");
        }
        Ok(s)
    }
}

/// The rest state of F_0 for a model: zero innovations, X_0 = 0, ξ_0 = 0.
pub fn default_past(model: &ModelSpec) -> PastState {
    match model {
        ModelSpec::Linear { coeffs, .. } => PastState::Innovations { window: vec![0.0; coeffs.len()] },
        ModelSpec::Iid { .. } => PastState::Innovations { window: vec![0.0] },
        ModelSpec::Ar1 { .. } => PastState::Ar1 { x0: 0.0, eps0: Some(0.0) },
        ModelSpec::TorusWalk { step, .. } => PastState::Torus { xi_prev: 1.0 - step, xi0: 0.0 },
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub conditions: Option<Vec<SeriesDiagnostic>>,
}

/// Execute the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let exec = Executor::new(config.workers)?;
    let start = Instant::now();
    let model = &config.model;
    let seed = config.seed;
    let ctx = |reps: u64| McContext::new(&exec, seed, McBudget::fixed(reps.max(2)));
    let base = McContext::new(&exec, seed, McBudget::default());
    let past_of = |p: &Option<PastState>| p.clone().unwrap_or_else(|| default_past(model));
    let mut conditions = None;
    let mut report = match &config.experiment {
        ExperimentKind::Simulate(s) => simulate_experiment(model, &s.n_grid.resolve()?, s.replicates, &base)?,
        ExperimentKind::ApproxRate(s) => rate_experiment(model, s.p, &s.n_grid.resolve()?, &ctx(s.replicates), s.construction)?,
        ExperimentKind::Quenched(s) => {
            quenched_fclt(model, &past_of(&s.past), &s.n_grid.resolve()?, s.replicates, &s.functionals, s.clip, &base)?
        }
        ExperimentKind::Resquen(s) => resquen_decay(model, &past_of(&s.past), &s.n_grid.resolve()?, s.replicates, s.truncation, &base)?,
        ExperimentKind::Mdp(s) => mdp_experiment(model, s.n, &s.r_grid, s.replicates, &base)?,
        ExperimentKind::Wasserstein(s) => wasserstein_rate_experiment(model, s.p, s.r, &s.n_grid.resolve()?, s.replicates, &base)?,
        ExperimentKind::Cvm(s) => {
            let setup = CvmSetup::with_nodes(Marginal::of_model(model)?, s.measure, s.p, s.nodes, 1.0)?;
            cvm_rate_experiment(model, &setup, &s.n_grid.resolve()?, s.paths, &base)?
        }
        ExperimentKind::Conditions(s) => {
            let (rep, diags) = conditions_experiment(model, s, &base)?;
            conditions = Some(diags);
            rep
        }
        ExperimentKind::Inequalities(s) => inequalities_experiment(model, &past_of(&s.past), s, &base)?,
        ExperimentKind::ErgodicRate(s) => ergodic_rate_experiment(model, s.p, s.psi, &s.n_grid.resolve()?, s.paths, &base)?,
    };
    report.body.config = config.echo()?;
    report.runtime.wall_time_s = start.elapsed().as_secs_f64();
    report.runtime.workers = config.workers;
    Ok(RunOutput { report, conditions })
}

/// Write report.json, rows.csv, manifest.txt (and conditions.csv) into `dir`.
pub fn write_outputs(out: &RunOutput, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    std::fs::write(&path, out.report.to_json()?)?;
    written.push(path);
    let path = dir.join("rows.csv");
    out.report.write_rows_csv(std::fs::File::create(&path)?)?;
    written.push(path);
    if let Some(diags) = &out.conditions {
        let path = dir.join("conditions.csv");
        write_verdict_table(diags, std::fs::File::create(&path)?)?;
        written.push(path);
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest(out, config)?)?;
    written.push(path);
    Ok(written)
}

pub fn manifest(out: &RunOutput, config: &ExperimentConfig) -> Result<String> {
    let b = &out.report.body;
    Ok(format!(
        "martlab {}\npolicy_version {}\nkind {}\nseed {}\nworkers {}\nconfig_sha256 {}\nverdict {}\nwall_time_s {:.3}\n",
        b.library_version,
        b.policy_version,
        b.kind,
        b.seed,
        config.workers,
        config.hash()?,
        b.verdict,
        out.report.runtime.wall_time_s,
    ))
}

/// Moments of S_n/√n against the exact second moment v_n/n.
pub fn simulate_experiment(model: &ModelSpec, n_grid: &[usize], reps: u64, ctx: &McContext<'_>) -> Result<ExperimentReport> {
    model.validate()?;
    if reps < 2 {
        return Err(MartlabError::InvalidArgument("need at least 2 replicates".into()));
    }
    let grid = check_grid(n_grid)?;
    let sums = crate::limit::partial_sums_on_grid(model, &grid, reps, &PastMode::FreshStationary, ctx)?;
    let mut rows = Vec::new();
    for (g, &n) in grid.iter().enumerate() {
        let scale = (n as f64).sqrt();
        let first = MeanEstimate::from_samples(&sums[g].iter().map(|s| s / scale).collect::<Vec<_>>());
        let second = MeanEstimate::from_samples(&sums[g].iter().map(|s| s * s / n as f64).collect::<Vec<_>>());
        rows.push(ReportRow::new(n as u64, "mean", first.mean, first.stderr).with_benchmark(0.0));
        rows.push(ReportRow::new(n as u64, "second_moment", second.mean, second.stderr).with_benchmark(model.var_partial_sum(n) / n as f64));
    }
    let rules = ["mean", "second_moment"]
        .iter()
        .map(|s| (format!("{s}_matches_exact"), Rule::GapWithin { series: s.to_string(), sigmas: POLICY.consistency_sigmas }))
        .collect();
    let notes = vec![format!("replicates per n: {reps}"), format!("sigma^2 = {:.12e}", model.sigma2())];
    Ok(ExperimentReport::build("simulate", ctx.seed, rows, rules, notes))
}

/// Verdicts for a list of conditions, plus the ρ-mixing pair when requested.
pub fn conditions_experiment(
    model: &ModelSpec,
    params: &ConditionsParams,
    ctx: &McContext<'_>,
) -> Result<(ExperimentReport, Vec<SeriesDiagnostic>)> {
    let mut diags = Vec::new();
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for spec in &params.conditions {
        let d = evaluate_condition(model, spec, ctx)?;
        rows.push(condition_row(&d, spec.n_max as u64, spec.p));
        diags.push(d);
    }
    if let Some(rho) = &params.rho {
        let rhos = (0..=rho.k_max).map(|k| mixing_rho(model, 1usize << k)).collect::<Result<Vec<_>>>()?;
        let (a, b) = condmdprho_check(&rhos, rho.p, rho.r)?;
        for d in [a, b] {
            rows.push(condition_row(&d, 1u64 << rho.k_max, rho.p));
            diags.push(d);
        }
    }
    for d in &diags {
        for note in &d.notes {
            notes.push(format!("{} ({}): {note}", d.condition, d.params));
        }
    }
    let rules = vec![("all_conditions_convergent".to_string(), Rule::AllFlagged { series: "condition".into() })];
    let rep = ExperimentReport::build("conditions", ctx.seed, rows, rules, notes);
    Ok((rep, diags))
}

fn condition_row(d: &SeriesDiagnostic, n: u64, p: f64) -> ReportRow {
    let mut row = ReportRow::new(n, "condition", d.partial_sum(), 0.0)
        .with_param(p)
        .with_flag(d.verdict == SeriesVerdict::Convergent);
    if let Some(s) = d.tail_slope {
        row = row.with_aux(s, 0.0);
    }
    row
}

/// Dyadic chaining on random walks and the conditional Doob bound.
pub fn inequalities_experiment(
    model: &ModelSpec,
    past: &PastState,
    params: &InequalitiesParams,
    ctx: &McContext<'_>,
) -> Result<ExperimentReport> {
    if params.chain_p.iter().any(|p| !(*p >= 1.0)) {
        return Err(MartlabError::InvalidArgument("chain exponents must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for r in 0..=params.chain_r_max {
        let per_seq = ctx.exec.try_map(0..params.chain_sequences, |i| {
            let mut s = CounterStream::new(ctx.seed, Purpose::Aux(30 + r), i);
            let mut acc = 0.0;
            let walk: Vec<f64> = (0..1usize << r)
                .map(|_| {
                    acc += s.normal_slot();
                    acc
                })
                .collect();
            params.chain_p.iter().map(|&p| dyadic_chain_bound(&walk, p)).collect::<Result<Vec<_>>>()
        })?;
        for (j, &p) in params.chain_p.iter().enumerate() {
            let worst = per_seq.iter().map(|v| v[j].lhs / v[j].rhs).fold(0.0, f64::max);
            let holds = per_seq.iter().all(|v| v[j].lhs <= v[j].rhs);
            rows.push(ReportRow::new(1u64 << r, "chain", worst, 0.0).with_param(p).with_flag(holds));
        }
    }
    let mut rules = vec![("chain_bound_holds".to_string(), Rule::AllFlagged { series: "chain".into() })];
    let mut notes = vec![format!("chain: {} random walks per r", params.chain_sequences)];
    if !params.r_values.is_empty() {
        let doob = doob_experiment(model, past, &params.r_values, params.replicates, ctx)?;
        rows.extend(doob.body.rows);
        rules.extend(doob.body.checks.into_iter().map(|c| (c.name, c.rule)));
        notes.extend(doob.body.notes);
    }
    Ok(ExperimentReport::build("inequalities", ctx.seed, rows, rules, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::InnovationLaw;
    use crate::report::Verdict;

    #[test]
    fn grids() {
        assert_eq!(dyadic_grid(2, 4), vec![4, 8, 16]);
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[4, 4]).is_err());
        assert!(check_grid(&[0, 4]).is_err());
        assert_eq!(GridSpec::dyadic(3, 5).resolve().unwrap(), vec![8, 16, 32]);
    }

    #[test]
    fn config_defaults_and_parsing() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let text = r#"
            seed = 7
            workers = 2
            [model]
            kind = "iid"
            innovation = { law = "rademacher" }
            [experiment]
            kind = "rate_experiment"
            p = 3.0
            n_grid = { dyadic = [4, 6] }
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seed, 7);
        match &cfg.experiment {
            ExperimentKind::ApproxRate(a) => {
                assert_eq!(a.p, 3.0);
                assert_eq!(a.replicates, 100_000);
                assert_eq!(a.n_grid.resolve().unwrap(), vec![16, 32, 64]);
            }
            other => panic!("{other:?}"),
        }
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(matches!(ExperimentConfig::from_toml_str("sede = 1"), Err(MartlabError::Config(_))));
        assert!(ExperimentConfig::from_toml_str("[experiment]\nkind = \"mdp\"\nreps = 4").is_err());
        assert!(ExperimentConfig::from_toml_str("workers = 0").is_err());
        for name in ExperimentKind::NAMES {
            assert_eq!(ExperimentKind::default_for(name).unwrap().name(), name);
        }
        assert!(ExperimentKind::default_for("nope").is_err());
    }

    #[test]
    fn seed_precedence() {
        let mut c = ExperimentConfig { seed: 1, ..Default::default() };
        c.resolve_seed(None, None).unwrap();
        assert_eq!(c.seed, 1);
        c.resolve_seed(None, Some("5")).unwrap();
        assert_eq!(c.seed, 5);
        c.resolve_seed(Some(9), Some("5")).unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.resolve_seed(None, Some("x")).is_err());
    }

    #[test]
    fn echo_excludes_runtime_fields() {
        let a = ExperimentConfig { workers: 1, ..Default::default() };
        let b = ExperimentConfig { workers: 8, out_dir: "elsewhere".into(), ..Default::default() };
        assert_eq!(a.echo().unwrap(), b.echo().unwrap());
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn iid_rate_run_is_zero_and_passes() {
        let cfg = ExperimentConfig {
            model: ModelSpec::iid(InnovationLaw::StandardNormal),
            experiment: ExperimentKind::ApproxRate(ApproxRateParams {
                n_grid: GridSpec::dyadic(4, 8),
                replicates: 200,
                ..Default::default()
            }),
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert!(out.report.rows("remainder").iter().all(|r| r.estimate == 0.0));
        assert_eq!(out.report.verdict(), Verdict::Pass);
    }

    #[test]
    fn simulate_matches_exact_moments() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Simulate(SimulateParams { n_grid: GridSpec::dyadic(2, 8), replicates: 4000 }),
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.report.verdict(), Verdict::Pass, "{:?}", out.report.body.checks);
    }

    #[test]
    fn rho_request_on_torus_is_rejected() {
        let cfg = ExperimentConfig {
            model: ModelSpec::torus(vec![crate::models::Complex::new(0.5, 0.0)]),
            experiment: ExperimentKind::Conditions(ConditionsParams {
                conditions: vec![],
                rho: Some(RhoParams { p: 3.0, r: 3.0, k_max: 8 }),
            }),
            ..Default::default()
        };
        assert!(matches!(run(&cfg), Err(MartlabError::NotApplicable(_))));
    }

    #[test]
    fn conditions_run_writes_verdict_table() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Conditions(ConditionsParams {
                conditions: vec![ConditionSpec::new(ConditionName::Mw, 2.0), ConditionSpec::new(ConditionName::CondMdp1Second, 3.0)],
                rho: Some(RhoParams { p: 3.0, r: 4.0, k_max: 12 }),
            }),
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.conditions.as_ref().unwrap().len(), 4);
        assert_eq!(out.report.verdict(), Verdict::Pass, "{:?}", out.report.body.checks);
        let dir = std::env::temp_dir().join(format!("martlab-cond-{}", std::process::id()));
        let files = write_outputs(&out, &cfg, &dir).unwrap();
        assert_eq!(files.len(), 4);
        let table = std::fs::read_to_string(dir.join("conditions.csv")).unwrap();
        assert!(table.starts_with("condition,params,partial_sum,tail_slope,verdict"));
        let back = ExperimentReport::from_json(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(back, out.report);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn inequalities_run() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Inequalities(InequalitiesParams {
                past: Some(PastState::Ar1 { x0: 1.0, eps0: None }),
                r_values: vec![3, 5],
                replicates: 4000,
                chain_sequences: 50,
                chain_r_max: 6,
                ..Default::default()
            }),
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.report.verdict(), Verdict::Pass, "{:?}", out.report.body.checks);
    }
}
