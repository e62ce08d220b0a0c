//! Experiment reports, the verdict policy table and log-log slope fitting.
//!
//! A report body holds rows plus the rules that turn rows into checks. The
//! verdict is always recomputed from rows and rules, so re-verdicting a
//! parsed report reproduces the stored verdict.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{MartlabError, Result};
use crate::rng::{CounterStream, Purpose};

pub const POLICY_VERSION: u32 = 1;

/// Every tolerance used to turn measurements into verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub version: u32,
    /// Largest admissible log-log slope of an error/bound ratio.
    pub rate_slope_tol: f64,
    /// Margin around −1 for series convergence verdicts.
    pub series_margin: f64,
    /// Added to 1 − p/2 for Wasserstein rate verdicts.
    pub wasserstein_slope_margin: f64,
    /// Normal quantile for two-sided 95% intervals.
    pub ci_z: f64,
    /// Multiplicative slack on the lower RHS bound in statistical inequality checks.
    pub inequality_slack: f64,
    /// Top-octave value must fall below this fraction of the bottom-octave value.
    pub decay_fraction: f64,
    /// Absolute level under which a decaying sequence counts as vanished.
    pub decay_floor: f64,
    /// Combined-stderr multiplier for benchmark gaps.
    pub gap_sigmas: f64,
    /// Minimum expected tail count per grid point in MDP curves.
    pub tail_count_floor: f64,
    /// Bootstrap resamples for slope intervals.
    pub bootstrap_resamples: usize,
    /// Independent same-size Gaussian samples behind each sampling floor.
    pub floor_draws: usize,
    /// Floor band = floor mean + this many floor standard deviations.
    pub floor_band_sigmas: f64,
    /// Combined-stderr multiplier for simulation consistency checks against exact moments.
    pub consistency_sigmas: f64,
}

pub const POLICY: Policy = Policy {
    version: POLICY_VERSION,
    rate_slope_tol: 0.05,
    series_margin: 0.15,
    wasserstein_slope_margin: 0.15,
    ci_z: 1.959_963_984_540_054,
    inequality_slack: 1.02,
    decay_fraction: 0.5,
    decay_floor: 1e-12,
    gap_sigmas: 3.0,
    tail_count_floor: 100.0,
    bootstrap_resamples: 2000,
    floor_draws: 8,
    floor_band_sigmas: 4.0,
    consistency_sigmas: 4.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One grid point of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u64,
    pub label: String,
    /// Secondary abscissa (e.g. the deviation level r).
    pub param: Option<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub benchmark: Option<f64>,
    pub ratio: Option<f64>,
    pub aux: Option<f64>,
    pub aux_stderr: Option<f64>,
    pub flag: Option<bool>,
}

impl ReportRow {
    pub fn new(n: u64, label: &str, estimate: f64, stderr: f64) -> Self {
        Self {
            n,
            label: label.to_string(),
            param: None,
            estimate,
            stderr,
            lower: None,
            upper: None,
            benchmark: None,
            ratio: None,
            aux: None,
            aux_stderr: None,
            flag: None,
        }
    }

    pub fn with_param(mut self, param: f64) -> Self {
        self.param = Some(param);
        self
    }

    pub fn with_interval(mut self, lower: f64, upper: f64) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn with_flag(mut self, flag: bool) -> Self {
        self.flag = Some(flag);
        self
    }

    pub fn with_benchmark(mut self, benchmark: f64) -> Self {
        self.benchmark = Some(benchmark);
        self.ratio = if benchmark != 0.0 {
            Some(self.estimate / benchmark)
        } else if self.estimate == 0.0 {
            Some(0.0)
        } else {
            None
        };
        self
    }

    pub fn with_aux(mut self, aux: f64, aux_stderr: f64) -> Self {
        self.aux = Some(aux);
        self.aux_stderr = Some(aux_stderr);
        self
    }
}

/// Row column a rule reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Estimate,
    Ratio,
    Aux,
}

impl Field {
    fn get(&self, row: &ReportRow) -> Option<f64> {
        match self {
            Field::Estimate => Some(row.estimate),
            Field::Ratio => row.ratio,
            Field::Aux => row.aux,
        }
    }
}

/// A documented rule mapping the rows of one series to pass/fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// Log-log slope of `field` is at most `max_slope`; an all-zero series passes.
    SlopeAtMost { series: String, field: Field, max_slope: f64 },
    /// Max of `field` over the top half of the grid is below the max over the bottom half;
    /// an all-zero series passes.
    TopBelowBottom { series: String, field: Field },
    /// Value at the largest n is below `fraction` × value at the smallest n, or below `floor`.
    LastBelowFraction { series: String, field: Field, fraction: f64, floor: f64 },
    /// |estimate − benchmark| ≤ sigmas × stderr on every row (stderr already combined).
    GapWithin { series: String, sigmas: f64 },
    /// Every row's flag is set.
    AllFlagged { series: String },
    /// lower ≤ benchmark ≤ upper on every row.
    CoversBenchmark { series: String },
    /// `aux` ≤ `field` on every row.
    AuxAtMostField { series: String, field: Field },
}

impl Rule {
    pub fn series(&self) -> &str {
        match self {
            Rule::SlopeAtMost { series, .. }
            | Rule::TopBelowBottom { series, .. }
            | Rule::LastBelowFraction { series, .. }
            | Rule::GapWithin { series, .. }
            | Rule::AllFlagged { series }
            | Rule::CoversBenchmark { series }
            | Rule::AuxAtMostField { series, .. } => series,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub rule: Rule,
    pub passed: Option<bool>,
    pub statistic: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci: (f64, f64),
    pub points: usize,
}

/// Deterministic part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub kind: String,
    pub library_version: String,
    pub policy_version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub notes: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub wall_time_s: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub body: ReportBody,
    pub runtime: Runtime,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    n: u64,
    label: String,
    param: Option<f64>,
    estimate: f64,
    stderr: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    benchmark: Option<f64>,
    ratio: Option<f64>,
    aux: Option<f64>,
    aux_stderr: Option<f64>,
    flag: Option<bool>,
}

impl ExperimentReport {
    /// Build a report, sorting rows and deriving checks and verdict.
    pub fn build(kind: &str, seed: u64, mut rows: Vec<ReportRow>, rules: Vec<(String, Rule)>, notes: Vec<String>) -> Self {
        sort_rows(&mut rows);
        let mut body = ReportBody {
            kind: kind.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            policy_version: POLICY_VERSION,
            seed,
            config: serde_json::Value::Null,
            notes,
            rows,
            checks: rules
                .into_iter()
                .map(|(name, rule)| Check { name, rule, passed: None, statistic: None, detail: String::new() })
                .collect(),
            verdict: Verdict::Inconclusive,
        };
        rederive(&mut body);
        Self { body, runtime: Runtime { wall_time_s: 0.0, workers: 1 } }
    }

    pub fn verdict(&self) -> Verdict {
        self.body.verdict
    }

    pub fn rows(&self, label: &str) -> Vec<&ReportRow> {
        self.body.rows.iter().filter(|r| r.label == label).collect()
    }

    pub fn row(&self, label: &str, n: u64) -> Option<&ReportRow> {
        self.body.rows.iter().find(|r| r.label == label && r.n == n)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.body.checks.iter().find(|c| c.name == name)
    }

    /// Canonical JSON of the body alone (no timing).
    pub fn body_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.body)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_rows_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.body.rows {
            wr.serialize(CsvRow {
                n: r.n,
                label: r.label.clone(),
                param: r.param,
                estimate: r.estimate,
                stderr: r.stderr,
                lower: r.lower,
                upper: r.upper,
                benchmark: r.benchmark,
                ratio: r.ratio,
                aux: r.aux,
                aux_stderr: r.aux_stderr,
                flag: r.flag,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_rows_csv<R: Read>(r: R) -> Result<Vec<ReportRow>> {
        let mut rd = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for row in rd.deserialize() {
            let c: CsvRow = row?;
            out.push(ReportRow {
                n: c.n,
                label: c.label,
                param: c.param,
                estimate: c.estimate,
                stderr: c.stderr,
                lower: c.lower,
                upper: c.upper,
                benchmark: c.benchmark,
                ratio: c.ratio,
                aux: c.aux,
                aux_stderr: c.aux_stderr,
                flag: c.flag,
            });
        }
        Ok(out)
    }

    /// Recompute checks and verdict from rows.
    pub fn reverdict(&mut self) -> Verdict {
        rederive(&mut self.body);
        self.body.verdict
    }
}

fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| a.param.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.param.unwrap_or(f64::NEG_INFINITY)))
    });
}

/// Recompute every check and the overall verdict (PASS iff every decided check passes;
/// INCONCLUSIVE if some check could not be decided and none failed).
pub fn rederive(body: &mut ReportBody) {
    sort_rows(&mut body.rows);
    let rows = body.rows.clone();
    let mut any_fail = false;
    let mut any_undecided = false;
    for check in &mut body.checks {
        let (passed, statistic, detail) = evaluate(&check.rule, &rows);
        check.passed = passed;
        check.statistic = statistic.filter(|v| v.is_finite());
        check.detail = detail;
        match passed {
            Some(false) => any_fail = true,
            None => any_undecided = true,
            _ => {}
        }
    }
    body.verdict = if any_fail {
        Verdict::Fail
    } else if any_undecided {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
}

fn series_points(rows: &[ReportRow], series: &str, field: Field) -> Vec<(f64, f64)> {
    rows.iter().filter(|r| r.label == series).filter_map(|r| field.get(r).map(|v| (r.n as f64, v))).collect()
}

fn evaluate(rule: &Rule, rows: &[ReportRow]) -> (Option<bool>, Option<f64>, String) {
    match rule {
        Rule::SlopeAtMost { series, field, max_slope } => {
            let pts = series_points(rows, series, *field);
            if !pts.is_empty() && pts.iter().all(|p| p.1 == 0.0) {
                return (Some(true), None, "all values zero".into());
            }
            // Zeros mark values below detection and are left out of the fit.
            let pts: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.1 != 0.0).collect();
            match fit_slope_points(&pts, None) {
                Ok(fit) => {
                    (Some(fit.slope <= *max_slope), Some(fit.slope), format!("slope {:.4} vs max {max_slope}", fit.slope))
                }
                Err(e) => (None, None, e.to_string()),
            }
        }
        Rule::TopBelowBottom { series, field } => {
            let pts = series_points(rows, series, *field);
            if pts.len() < 2 {
                return (None, None, "fewer than two grid points".into());
            }
            if pts.iter().all(|p| p.1 == 0.0) {
                return (Some(true), Some(0.0), "all values zero".into());
            }
            let half = pts.len() / 2;
            let bottom = pts[..half].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let top = pts[half..].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            (Some(top < bottom), Some(top / bottom), format!("top max {top:.6e} vs bottom max {bottom:.6e}"))
        }
        Rule::LastBelowFraction { series, field, fraction, floor } => {
            let pts = series_points(rows, series, *field);
            if pts.len() < 2 {
                return (None, None, "fewer than two grid points".into());
            }
            let (first, last) = (pts[0].1, pts[pts.len() - 1].1);
            let ok = last < fraction * first || last < *floor;
            let stat = if first > 0.0 { last / first } else { 0.0 };
            (Some(ok), Some(stat), format!("last {last:.6e} vs first {first:.6e}"))
        }
        Rule::GapWithin { series, sigmas } => {
            let sel: Vec<&ReportRow> = rows.iter().filter(|r| &r.label == series).collect();
            if sel.is_empty() {
                return (None, None, "no rows".into());
            }
            let mut worst: f64 = 0.0;
            for r in &sel {
                let Some(b) = r.benchmark else { return (None, None, "missing benchmark".into()) };
                let gap = (r.estimate - b).abs();
                let z = if r.stderr > 0.0 { gap / r.stderr } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
                worst = worst.max(z);
            }
            (Some(worst <= *sigmas), Some(worst), format!("max gap {worst:.3} stderr vs {sigmas}"))
        }
        Rule::AllFlagged { series } => {
            let sel: Vec<&ReportRow> = rows.iter().filter(|r| &r.label == series).collect();
            if sel.is_empty() {
                return (None, None, "no rows".into());
            }
            let bad = sel.iter().filter(|r| r.flag != Some(true)).count();
            (Some(bad == 0), Some(bad as f64), format!("{bad} of {} rows unflagged", sel.len()))
        }
        Rule::CoversBenchmark { series } => {
            let sel: Vec<&ReportRow> = rows.iter().filter(|r| &r.label == series).collect();
            if sel.is_empty() {
                return (None, None, "no rows".into());
            }
            let mut bad = 0;
            for r in &sel {
                let (Some(lo), Some(hi), Some(b)) = (r.lower, r.upper, r.benchmark) else {
                    return (None, None, "missing interval or benchmark".into());
                };
                if !(lo <= b && b <= hi) {
                    bad += 1;
                }
            }
            (Some(bad == 0), Some(bad as f64), format!("{bad} of {} intervals miss the benchmark", sel.len()))
        }
        Rule::AuxAtMostField { series, field } => {
            let sel: Vec<&ReportRow> = rows.iter().filter(|r| &r.label == series).collect();
            if sel.is_empty() {
                return (None, None, "no rows".into());
            }
            let mut worst = f64::NEG_INFINITY;
            for r in &sel {
                let (Some(a), Some(v)) = (r.aux, field.get(r)) else {
                    return (None, None, "missing column".into());
                };
                worst = worst.max(a - v);
            }
            (Some(worst <= 0.0), Some(worst), format!("max excess {worst:.6e}"))
        }
    }
}

/// Least squares on (log n, log value); the interval is a parametric bootstrap
/// over the stderrs when supplied, else a t interval from the residuals.
pub fn fit_slope(ns: &[f64], values: &[f64], stderrs: Option<&[f64]>) -> Result<SlopeFit> {
    if ns.len() != values.len() {
        return Err(MartlabError::SizeMismatch { left: ns.len(), right: values.len() });
    }
    let pts: Vec<(f64, f64)> = ns.iter().copied().zip(values.iter().copied()).collect();
    fit_slope_points(&pts, stderrs)
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, rss / sxx)
}

fn fit_slope_points(pts: &[(f64, f64)], stderrs: Option<&[f64]>) -> Result<SlopeFit> {
    if pts.len() < 4 {
        return Err(MartlabError::InvalidArgument(format!("slope fit needs at least 4 points, got {}", pts.len())));
    }
    if let Some(bad) = pts.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(MartlabError::InvalidArgument(format!("slope fit needs positive values, got {} at n={}", bad.1, bad.0)));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, rss_over_sxx) = ols(&x, &y);
    let dof = (pts.len() - 2) as f64;
    let ci = match stderrs {
        Some(se) if se.len() == pts.len() && se.iter().any(|&s| s > 0.0) => {
            let b = POLICY.bootstrap_resamples;
            let mut slopes: Vec<f64> = (0..b as u64)
                .map(|r| {
                    let mut s = CounterStream::new(0x5eed_f17, Purpose::Aux(99), r);
                    let yb: Vec<f64> = pts
                        .iter()
                        .zip(se)
                        .map(|(p, &e)| (p.1 + e * s.normal_slot()).max(p.1 * 1e-6).ln())
                        .collect();
                    ols(&x, &yb).0
                })
                .collect();
            slopes.sort_by(f64::total_cmp);
            let lo = slopes[((0.025 * b as f64) as usize).min(b - 1)];
            let hi = slopes[((0.975 * b as f64) as usize).min(b - 1)];
            (lo.min(slope), hi.max(slope))
        }
        _ => {
            let se = (rss_over_sxx / dof).sqrt();
            let t = StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(0.975)).unwrap_or(1.96);
            (slope - t * se, slope + t * se)
        }
    };
    Ok(SlopeFit { slope, intercept, ci, points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_laws() {
        let ns: Vec<f64> = (0..8).map(|k| 2f64.powi(k)).collect();
        let fit = fit_slope(&ns, &ns, None).unwrap();
        assert_relative_eq!(fit.slope, 1.0, epsilon = 1e-14);
        let v: Vec<f64> = ns.iter().map(|n| 3.0 * n.powf(-0.5)).collect();
        let fit = fit_slope(&ns, &v, None).unwrap();
        assert!((fit.slope + 0.5).abs() <= 1e-12);
        assert!(fit_slope(&ns[..3], &v[..3], None).is_err());
        let mut bad = v.clone();
        bad[2] = 0.0;
        assert!(fit_slope(&ns, &bad, None).is_err());
    }

    #[test]
    fn bootstrap_interval_calibration() {
        // 100 synthetic trials: noisy power law with known stderrs.
        let ns: Vec<f64> = (4..=12).map(|k| 2f64.powi(k)).collect();
        let mut covered = 0;
        for trial in 0..100u64 {
            let mut s = CounterStream::new(trial, Purpose::Aux(5), 0);
            let truth: Vec<f64> = ns.iter().map(|n| 2.0 * n.powf(-0.3)).collect();
            let se: Vec<f64> = truth.iter().map(|t| 0.03 * t).collect();
            let obs: Vec<f64> = truth.iter().zip(&se).map(|(t, e)| t + e * s.normal_slot()).collect();
            let fit = fit_slope(&ns, &obs, Some(&se)).unwrap();
            if fit.ci.0 <= -0.3 && -0.3 <= fit.ci.1 {
                covered += 1;
            }
        }
        assert!(covered >= 90, "coverage {covered}/100");
    }

    fn sample_report() -> ExperimentReport {
        let rows = vec![
            ReportRow::new(16, "remainder", 1.0, 0.01).with_benchmark(2.0),
            ReportRow::new(4, "remainder", 1.0, 0.01).with_benchmark(2.0),
            ReportRow::new(8, "remainder", 1.0, 0.01).with_benchmark(2.0),
            ReportRow::new(32, "remainder", 1.0, 0.01).with_benchmark(2.0).with_aux(0.1, 0.2).with_flag(true),
            ReportRow::new(32, "curve", 1.0, 0.01).with_param(1.5).with_interval(0.9, 1.1).with_benchmark(1.0),
        ];
        let rules = vec![(
            "ratio_slope".to_string(),
            Rule::SlopeAtMost { series: "remainder".into(), field: Field::Ratio, max_slope: 0.05 },
        )];
        ExperimentReport::build("test", 1, rows, rules, vec!["note".into()])
    }

    #[test]
    fn rows_sorted_and_verdict() {
        let rep = sample_report();
        let ns: Vec<u64> = rep.body.rows.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![4, 8, 16, 32, 32]);
        assert_eq!(rep.verdict(), Verdict::Pass);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let rep = sample_report();
        let back = ExperimentReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
        let mut buf = Vec::new();
        rep.write_rows_csv(&mut buf).unwrap();
        let rows = ExperimentReport::read_rows_csv(&buf[..]).unwrap();
        assert_eq!(rows, rep.body.rows);
    }

    #[test]
    fn reverdict_is_idempotent_and_tracks_rows() {
        let mut rep = sample_report();
        let v = rep.verdict();
        assert_eq!(rep.reverdict(), v);
        for r in rep.body.rows.iter_mut() {
            r.ratio = Some(r.n as f64);
        }
        assert_eq!(rep.reverdict(), Verdict::Fail);
    }

    #[test]
    fn decay_rules() {
        let mk = |vals: &[f64]| -> Vec<ReportRow> {
            vals.iter().enumerate().map(|(i, &v)| ReportRow::new(1 << i, "s", v, 0.0)).collect()
        };
        let tb = Rule::TopBelowBottom { series: "s".into(), field: Field::Estimate };
        assert_eq!(evaluate(&tb, &mk(&[4.0, 3.0, 2.0, 1.0])).0, Some(true));
        assert_eq!(evaluate(&tb, &mk(&[1.0, 3.0, 2.0, 4.0])).0, Some(false));
        assert_eq!(evaluate(&tb, &mk(&[0.0; 4])).0, Some(true));
        let lf = Rule::LastBelowFraction { series: "s".into(), field: Field::Estimate, fraction: 0.5, floor: 1e-12 };
        assert_eq!(evaluate(&lf, &mk(&[4.0, 3.0, 2.0, 1.9])).0, Some(true));
        assert_eq!(evaluate(&lf, &mk(&[4.0, 3.0, 2.0, 2.1])).0, Some(false));
        assert_eq!(evaluate(&lf, &mk(&[0.0, 0.0])).0, Some(true));
    }
}
