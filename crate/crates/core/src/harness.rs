//! Multi-trial experiments: local law, counting, delocalization, rigidity
//! and the error-scaling study.
//!
//! Trials are independent work units run on a dedicated rayon pool. Every
//! trial is computed sequentially with its own RNG stream and results are
//! joined in trial order, so outputs do not depend on the worker count.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirics::{counting, deloc_statistic, rigidity_deviation, stieltjes_of};
use crate::ensembles::{product_spectrum, sample_pair, EnsembleSpec, EntryDistribution};
use crate::error::{Error, Result};
use crate::laws::{manova_density, manova_stieltjes, support_edges, ModelParams};
use crate::selfconsistent::{map_to_manova, ProductSolver, SolverConfig};

/// An experiment with more failed trials than this fraction fails as a whole.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

/// Minimum E-grid size for the sup over the bulk.
pub const MIN_E_GRID: usize = 50;

/// Minimum number of bulk points for the counting law.
pub const MIN_COUNTING_POINTS: usize = 5;

/// Solver tolerance for limiting product-side transforms.
pub const REFERENCE_TOL: f64 = 1e-12;

/// Required spread of `n * eta` in a scaling study.
pub const MIN_SCALING_SPREAD: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Locallaw,
    Counting,
    Deloc,
    Rigidity,
    Scaling,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Locallaw => "locallaw",
            ExperimentKind::Counting => "counting",
            ExperimentKind::Deloc => "deloc",
            ExperimentKind::Rigidity => "rigidity",
            ExperimentKind::Scaling => "scaling",
        })
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub params: ModelParams,
    pub dist: EntryDistribution,
    pub master_seed: u64,
    /// Matrix sizes; one run per entry.
    pub n_list: Vec<usize>,
    /// Spectral scales; locallaw and scaling runs evaluate every entry on the same spectra.
    pub eta_list: Vec<f64>,
    pub trials: usize,
    pub kappa: f64,
    pub e_grid: usize,
    pub counting_points: usize,
    pub threads: usize,
}

impl ExperimentPlan {
    /// Plan with the default grid sizes for one `n` and one `eta`.
    pub fn new(
        kind: ExperimentKind,
        params: ModelParams,
        dist: EntryDistribution,
        master_seed: u64,
        n: usize,
        eta: f64,
        trials: usize,
    ) -> Self {
        Self {
            kind,
            params,
            dist,
            master_seed,
            n_list: vec![n],
            eta_list: vec![eta],
            trials,
            kappa: 0.05,
            e_grid: MIN_E_GRID,
            counting_points: MIN_COUNTING_POINTS,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if !(self.kappa >= 0.0) {
            return fail(format!("kappa must be >= 0, got {}", self.kappa));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 2) {
            return fail(format!("every n must be >= 2, got {:?}", self.n_list));
        }
        if self.eta_list.is_empty() || self.eta_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return fail(format!("every eta must be > 0, got {:?}", self.eta_list));
        }
        if self.threads == 0 {
            return fail("threads must be >= 1".into());
        }
        match self.kind {
            ExperimentKind::Locallaw | ExperimentKind::Scaling if self.e_grid < MIN_E_GRID => {
                return fail(format!("e_grid must be >= {MIN_E_GRID}, got {}", self.e_grid));
            }
            ExperimentKind::Counting if self.counting_points < MIN_COUNTING_POINTS => {
                return fail(format!(
                    "counting_points must be >= {MIN_COUNTING_POINTS}, got {}",
                    self.counting_points
                ));
            }
            _ => {}
        }
        bulk_window_manova(&self.params, self.kappa)?;
        Ok(())
    }

    /// RNG key of run `n`. Runs at different sizes use unrelated streams.
    pub fn seed_for(&self, n: usize) -> u64 {
        splitmix64(self.master_seed ^ splitmix64(n as u64))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `{E : (lambda_+ - E)(E - lambda_-) >= kappa}` as a closed interval.
pub fn bulk_window_manova(params: &ModelParams, kappa: f64) -> Result<(f64, f64)> {
    if !(kappa >= 0.0) {
        return Err(Error::Validation(format!("kappa must be >= 0, got {kappa}")));
    }
    let e = support_edges(params);
    let mid = 0.5 * (e.lambda_minus + e.lambda_plus);
    let max = (0.5 * (e.lambda_plus - e.lambda_minus)).powi(2);
    if kappa > max * (1.0 + 1e-12) {
        return Err(Error::EmptyWindow { kappa, max });
    }
    if kappa == 0.0 {
        return Ok((e.lambda_minus, e.lambda_plus));
    }
    let r = (max - kappa).max(0.0).sqrt();
    Ok((mid - r, mid + r))
}

/// Image of [`bulk_window_manova`] under `E -> 1/E - 1`.
pub fn bulk_window_product(params: &ModelParams, kappa: f64) -> Result<(f64, f64)> {
    if kappa == 0.0 {
        let e = support_edges(params);
        return Ok((e.mu_minus, e.mu_plus));
    }
    let (lo, hi) = bulk_window_manova(params, kappa)?;
    Ok((1.0 / hi - 1.0, 1.0 / lo - 1.0))
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Limiting transforms on one E-grid at one `eta`.
#[derive(Debug, Clone)]
struct Reference {
    eta: f64,
    zs: Vec<Complex64>,
    manova: Vec<Complex64>,
    /// Upper half-plane images `conj(1/z - 1)` and the solver's `m_p` there.
    product_points: Vec<Complex64>,
    product: Vec<Complex64>,
}

impl Reference {
    fn build(params: &ModelParams, window: (f64, f64), points: usize, eta: f64, solver: &ProductSolver) -> Result<Self> {
        let zs: Vec<Complex64> = linspace(window.0, window.1, points)
            .into_iter()
            .map(|e| Complex64::new(e, eta))
            .collect();
        let manova = zs
            .iter()
            .map(|&z| manova_stieltjes(params, z))
            .collect::<Result<Vec<_>>>()?;
        let product_points: Vec<Complex64> = zs.iter().map(|&z| (1.0 / z - 1.0).conj()).collect();
        let product = product_points
            .iter()
            .map(|&w| solver.solve(w).map(|s| s.m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            eta,
            zs,
            manova,
            product_points,
            product,
        })
    }

    fn product_at(&self, w: Complex64) -> Result<Complex64> {
        self.product_points
            .iter()
            .position(|&p| p == w)
            .map(|i| self.product[i])
            .ok_or_else(|| Error::Validation(format!("no reference value at {w}")))
    }
}

/// One detailed local-law row: `(trial, E, eta, re_mn, im_mn, re_m, im_m, abs_err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalLawRow {
    pub trial: u64,
    #[serde(rename = "E")]
    pub e: f64,
    pub eta: f64,
    pub re_mn: f64,
    pub im_mn: f64,
    pub re_m: f64,
    pub im_m: f64,
    pub abs_err: f64,
}

/// One detailed counting row: `(trial, E, eta, count, normalized, f_value, abs_err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountingRow {
    pub trial: u64,
    #[serde(rename = "E")]
    pub e: f64,
    pub eta: f64,
    pub count: usize,
    pub normalized: f64,
    pub f_value: f64,
    pub abs_err: f64,
}

/// Per-trial statistics. Metrics that a given experiment does not measure are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub n: usize,
    pub eta: f64,
    pub failed: bool,
    pub error: Option<String>,
    /// `sup_E |m_{n,M} - m_M|` on the MANOVA grid.
    pub sup_stieltjes_error: Option<f64>,
    /// Same sup in product coordinates.
    pub sup_product_error: Option<f64>,
    /// MANOVA sup recomputed from product-side transforms through `map_to_manova`.
    pub sup_mapped_error: Option<f64>,
    pub counting_max_abs_error: Option<f64>,
    pub counting_max_rel_error: Option<f64>,
    pub deloc_statistic: Option<f64>,
    pub deloc_empty_window: Option<bool>,
    pub rigidity_deviation: Option<f64>,
    /// Excluded from CSV output, which must be reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl TrialRecord {
    fn empty(trial_index: u64, n: usize, eta: f64) -> Self {
        Self {
            trial_index,
            n,
            eta,
            failed: false,
            error: None,
            sup_stieltjes_error: None,
            sup_product_error: None,
            sup_mapped_error: None,
            counting_max_abs_error: None,
            counting_max_rel_error: None,
            deloc_statistic: None,
            deloc_empty_window: None,
            rigidity_deviation: None,
            wall_time_s: 0.0,
        }
    }

    fn failed(trial_index: u64, n: usize, eta: f64, err: &Error) -> Self {
        Self {
            failed: true,
            error: Some(err.to_string()),
            ..Self::empty(trial_index, n, eta)
        }
    }

    /// Named metrics in a fixed order.
    pub fn metrics(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("sup_stieltjes_error", self.sup_stieltjes_error),
            ("sup_product_error", self.sup_product_error),
            ("sup_mapped_error", self.sup_mapped_error),
            ("counting_max_abs_error", self.counting_max_abs_error),
            ("counting_max_rel_error", self.counting_max_rel_error),
            ("deloc_statistic", self.deloc_statistic),
            ("rigidity_deviation", self.rigidity_deviation),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

impl MetricSummary {
    fn from_values(metric: &'static str, mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(Self {
            metric,
            count: values.len(),
            min: values[0],
            q1: quantile_sorted(&values, 0.25),
            median: quantile_sorted(&values, 0.5),
            q3: quantile_sorted(&values, 0.75),
            max: values[values.len() - 1],
        })
    }
}

/// Cross-trial aggregate of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub kind: ExperimentKind,
    pub n: usize,
    pub eta: f64,
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub seed: u64,
    pub trial_indices: Vec<u64>,
    pub metrics: Vec<MetricSummary>,
}

impl SummaryTable {
    fn from_records(kind: ExperimentKind, n: usize, eta: f64, seed: u64, records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed).collect();
        let names = records
            .first()
            .map(|r| r.metrics().map(|(name, _)| name))
            .unwrap_or_default();
        let metrics = names
            .iter()
            .enumerate()
            .filter_map(|(i, &name)| {
                let values: Vec<f64> = ok.iter().filter_map(|r| r.metrics()[i].1).collect();
                MetricSummary::from_values(name, values)
            })
            .collect();
        Self {
            kind,
            n,
            eta,
            trials: records.len(),
            successes: ok.len(),
            failures: records.len() - ok.len(),
            seed,
            trial_indices: records.iter().map(|r| r.trial_index).collect(),
            metrics,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    pub fn median(&self, name: &str) -> Option<f64> {
        self.metric(name).map(|m| m.median)
    }
}

/// Results at one `(n, eta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub n: usize,
    pub eta: f64,
    pub records: Vec<TrialRecord>,
    #[serde(skip)]
    pub locallaw_rows: Vec<LocalLawRow>,
    #[serde(skip)]
    pub counting_rows: Vec<CountingRow>,
    pub summary: SummaryTable,
}

/// Least-squares fit of `log(median error)` against `log(n eta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    /// `(n eta, median error)` pairs the fit used.
    pub points: Vec<(f64, f64)>,
}

pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Validation("log-log fit needs positive data".into()));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::Validation(format!(
            "scaling fit needs >= 3 distinct n*eta values, got {}",
            xs.len()
        )));
    }
    let spread = xs[xs.len() - 1] / xs[0];
    if spread < MIN_SCALING_SPREAD {
        return Err(Error::Validation(format!(
            "n*eta must span a factor >= {MIN_SCALING_SPREAD}, got {spread}"
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
        points: points.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub plan: ExperimentPlan,
    pub runs: Vec<RunResult>,
    pub slope: Option<SlopeFit>,
}

impl ExperimentOutcome {
    pub fn total_trials(&self) -> usize {
        self.runs.iter().map(|r| r.summary.trials).sum()
    }

    pub fn total_failures(&self) -> usize {
        self.runs.iter().map(|r| r.summary.failures).sum()
    }

    /// Error when more than [`MAX_FAILURE_FRACTION`] of all trials failed.
    pub fn check_failures(&self) -> Result<()> {
        let (failed, trials) = (self.total_failures(), self.total_trials());
        if failed as f64 > MAX_FAILURE_FRACTION * trials as f64 {
            return Err(Error::ExperimentThreshold { failed, trials });
        }
        Ok(())
    }

    pub fn run(&self, n: usize, eta: f64) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.n == n && r.eta == eta)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

fn spec_for(plan: &ExperimentPlan, n: usize, trial: u64) -> EnsembleSpec {
    EnsembleSpec {
        n,
        params: plan.params,
        dist: plan.dist,
        master_seed: plan.seed_for(n),
        trial_index: trial,
    }
}

struct LocalLawTrial {
    records: Vec<TrialRecord>,
    rows: Vec<Vec<LocalLawRow>>,
}

fn locallaw_trial(plan: &ExperimentPlan, n: usize, trial: u64, refs: &[Reference]) -> Result<LocalLawTrial> {
    let started = Instant::now();
    let pair = sample_pair(&spec_for(plan, n, trial))?;
    let mu = product_spectrum(&pair, false)?;
    let lambda = mu.to_manova()?;
    let mut records = Vec::with_capacity(refs.len());
    let mut rows = Vec::with_capacity(refs.len());
    for reference in refs {
        let mut record = TrialRecord::empty(trial, n, reference.eta);
        let mut run_rows = Vec::with_capacity(reference.zs.len());
        let (mut sup_m, mut sup_p, mut sup_mapped) = (0.0f64, 0.0f64, 0.0f64);
        for (j, &z) in reference.zs.iter().enumerate() {
            let mn = stieltjes_of(&lambda.eigenvalues, z)?;
            let m = reference.manova[j];
            let err = (mn - m).norm();
            sup_m = sup_m.max(err);
            let w = reference.product_points[j];
            let mpn = stieltjes_of(&mu.eigenvalues, w)?;
            sup_p = sup_p.max((mpn - reference.product[j]).norm());
            let mapped_n = map_to_manova(z, |v| stieltjes_of(&mu.eigenvalues, v))?;
            let mapped_m = map_to_manova(z, |v| reference.product_at(v))?;
            sup_mapped = sup_mapped.max((mapped_n - mapped_m).norm());
            run_rows.push(LocalLawRow {
                trial,
                e: z.re,
                eta: z.im,
                re_mn: mn.re,
                im_mn: mn.im,
                re_m: m.re,
                im_m: m.im,
                abs_err: err,
            });
        }
        record.sup_stieltjes_error = Some(sup_m);
        record.sup_product_error = Some(sup_p);
        record.sup_mapped_error = Some(sup_mapped);
        records.push(record);
        rows.push(run_rows);
    }
    let elapsed = started.elapsed().as_secs_f64();
    for r in &mut records {
        r.wall_time_s = elapsed;
    }
    Ok(LocalLawTrial { records, rows })
}

/// Local law: per trial, the sup over the bulk E-grid of the Stieltjes error
/// in MANOVA and product coordinates, for every `n` and `eta` in the plan.
pub fn locallaw_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let window = bulk_window_manova(&plan.params, plan.kappa)?;
    let cfg = SolverConfig {
        tol: REFERENCE_TOL,
        ..SolverConfig::default()
    };
    let solver = ProductSolver::new(plan.params, cfg)?;
    let refs = plan
        .eta_list
        .iter()
        .map(|&eta| Reference::build(&plan.params, window, plan.e_grid, eta, &solver))
        .collect::<Result<Vec<_>>>()?;
    let workers = pool(plan.threads)?;
    let mut runs = Vec::new();
    for &n in &plan.n_list {
        let outcomes: Vec<Result<LocalLawTrial>> = workers.install(|| {
            (0..plan.trials as u64)
                .into_par_iter()
                .map(|t| locallaw_trial(plan, n, t, &refs))
                .collect()
        });
        for (k, reference) in refs.iter().enumerate() {
            let mut records = Vec::with_capacity(plan.trials);
            let mut rows = Vec::new();
            for (t, outcome) in outcomes.iter().enumerate() {
                match outcome {
                    Ok(trial) => {
                        records.push(trial.records[k].clone());
                        rows.extend_from_slice(&trial.rows[k]);
                    }
                    Err(e) => records.push(TrialRecord::failed(t as u64, n, reference.eta, e)),
                }
            }
            let summary = SummaryTable::from_records(plan.kind, n, reference.eta, plan.seed_for(n), &records);
            runs.push(RunResult {
                n,
                eta: reference.eta,
                records,
                locallaw_rows: rows,
                counting_rows: Vec::new(),
                summary,
            });
        }
    }
    Ok(ExperimentOutcome {
        plan: plan.clone(),
        runs,
        slope: None,
    })
}

/// Median MANOVA sup error against `n * eta` over the plan's size and scale
/// lists, with a log-log slope fit.
pub fn scaling_study(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    let mut products: Vec<f64> = plan
        .n_list
        .iter()
        .flat_map(|&n| plan.eta_list.iter().map(move |&eta| n as f64 * eta))
        .collect();
    products.sort_by(f64::total_cmp);
    products.dedup();
    if products.len() < 3 || products[products.len() - 1] / products[0] < MIN_SCALING_SPREAD {
        return Err(Error::Validation(format!(
            "scaling study needs >= 3 distinct n*eta values spanning a factor {MIN_SCALING_SPREAD}, got {products:?}"
        )));
    }
    let mut outcome = locallaw_experiment(plan)?;
    let points: Vec<(f64, f64)> = outcome
        .runs
        .iter()
        .filter_map(|r| {
            r.summary
                .median("sup_stieltjes_error")
                .map(|m| (r.n as f64 * r.eta, m))
        })
        .collect();
    outcome.slope = Some(fit_log_slope(&points)?);
    Ok(outcome)
}

fn counting_trial(
    plan: &ExperimentPlan,
    n: usize,
    eta: f64,
    trial: u64,
    points: &[f64],
) -> Result<(TrialRecord, Vec<CountingRow>)> {
    let started = Instant::now();
    let pair = sample_pair(&spec_for(plan, n, trial))?;
    let lambda = product_spectrum(&pair, false)?.to_manova()?;
    let mut record = TrialRecord::empty(trial, n, eta);
    let mut rows = Vec::with_capacity(points.len());
    let (mut worst_abs, mut worst_rel) = (0.0f64, 0.0f64);
    for &e in points {
        let c = counting(&lambda, e, eta)?;
        let f = manova_density(&plan.params, e);
        let abs_err = (c.normalized - f).abs();
        worst_abs = worst_abs.max(abs_err);
        if f > 0.0 {
            worst_rel = worst_rel.max(abs_err / f);
        }
        rows.push(CountingRow {
            trial,
            e,
            eta,
            count: c.count,
            normalized: c.normalized,
            f_value: f,
            abs_err,
        });
    }
    record.counting_max_abs_error = Some(worst_abs);
    record.counting_max_rel_error = Some(worst_rel);
    record.wall_time_s = started.elapsed().as_secs_f64();
    Ok((record, rows))
}

/// Counting law: per trial, the worst deviation of `N_eta(E) / (n eta)` from
/// `f_M(E)` over evenly spaced bulk points.
pub fn counting_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let window = bulk_window_manova(&plan.params, plan.kappa)?;
    let points = linspace(window.0, window.1, plan.counting_points);
    let workers = pool(plan.threads)?;
    let mut runs = Vec::new();
    for &n in &plan.n_list {
        for &eta in &plan.eta_list {
            let outcomes: Vec<Result<(TrialRecord, Vec<CountingRow>)>> = workers.install(|| {
                (0..plan.trials as u64)
                    .into_par_iter()
                    .map(|t| counting_trial(plan, n, eta, t, &points))
                    .collect()
            });
            let mut records = Vec::new();
            let mut rows = Vec::new();
            for (t, outcome) in outcomes.into_iter().enumerate() {
                match outcome {
                    Ok((record, r)) => {
                        records.push(record);
                        rows.extend(r);
                    }
                    Err(e) => records.push(TrialRecord::failed(t as u64, n, eta, &e)),
                }
            }
            let summary = SummaryTable::from_records(plan.kind, n, eta, plan.seed_for(n), &records);
            runs.push(RunResult {
                n,
                eta,
                records,
                locallaw_rows: Vec::new(),
                counting_rows: rows,
                summary,
            });
        }
    }
    Ok(ExperimentOutcome {
        plan: plan.clone(),
        runs,
        slope: None,
    })
}

fn per_size(
    plan: &ExperimentPlan,
    trial_fn: impl Fn(usize, u64) -> Result<TrialRecord> + Sync,
) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let workers = pool(plan.threads)?;
    let eta = plan.eta_list[0];
    let mut runs = Vec::new();
    for &n in &plan.n_list {
        let outcomes: Vec<Result<TrialRecord>> = workers.install(|| {
            (0..plan.trials as u64)
                .into_par_iter()
                .map(|t| trial_fn(n, t))
                .collect()
        });
        let records: Vec<TrialRecord> = outcomes
            .into_iter()
            .enumerate()
            .map(|(t, o)| o.unwrap_or_else(|e| TrialRecord::failed(t as u64, n, eta, &e)))
            .collect();
        let summary = SummaryTable::from_records(plan.kind, n, eta, plan.seed_for(n), &records);
        runs.push(RunResult {
            n,
            eta,
            records,
            locallaw_rows: Vec::new(),
            counting_rows: Vec::new(),
            summary,
        });
    }
    Ok(ExperimentOutcome {
        plan: plan.clone(),
        runs,
        slope: None,
    })
}

/// Delocalization: `sqrt(n) max |v_i|` over product-matrix eigenvectors with
/// eigenvalue inside the product bulk window.
pub fn deloc_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    let window = bulk_window_product(&plan.params, plan.kappa)?;
    let eta = plan.eta_list.first().copied().unwrap_or(f64::NAN);
    per_size(plan, |n, t| {
        let started = Instant::now();
        let pair = sample_pair(&spec_for(plan, n, t))?;
        let spectrum = product_spectrum(&pair, true)?;
        let d = deloc_statistic(&spectrum, window)?;
        let mut record = TrialRecord::empty(t, n, eta);
        record.deloc_statistic = Some(d.statistic);
        record.deloc_empty_window = Some(d.empty_window);
        record.wall_time_s = started.elapsed().as_secs_f64();
        Ok(record)
    })
}

/// Rigidity of `T = (YY*/n)^{-1}` around the inverse-Wishart classical locations.
pub fn rigidity_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    let eta = plan.eta_list.first().copied().unwrap_or(f64::NAN);
    per_size(plan, |n, t| {
        let started = Instant::now();
        let pair = sample_pair(&spec_for(plan, n, t))?;
        let mut record = TrialRecord::empty(t, n, eta);
        record.rigidity_deviation = Some(rigidity_deviation(&pair, plan.params.a())?);
        record.wall_time_s = started.elapsed().as_secs_f64();
        Ok(record)
    })
}

/// Dispatch on the plan's kind.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    match plan.kind {
        ExperimentKind::Locallaw => locallaw_experiment(plan),
        ExperimentKind::Counting => counting_experiment(plan),
        ExperimentKind::Deloc => deloc_experiment(plan),
        ExperimentKind::Rigidity => rigidity_experiment(plan),
        ExperimentKind::Scaling => scaling_study(plan),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(2.0, 2.0).unwrap()
    }

    fn small_plan(kind: ExperimentKind) -> ExperimentPlan {
        let mut plan = ExperimentPlan::new(kind, params(), EntryDistribution::ComplexGaussian, 11, 40, 0.1, 3);
        plan.threads = 2;
        plan
    }

    #[test]
    fn manova_window_examples() {
        let e = support_edges(&params());
        assert_eq!(bulk_window_manova(&params(), 0.0).unwrap(), (e.lambda_minus, e.lambda_plus));
        let (lo, hi) = bulk_window_manova(&params(), 3.0 / 16.0).unwrap();
        assert!((lo - 0.5).abs() < 1e-8 && (hi - 0.5).abs() < 1e-8);
        assert!(matches!(bulk_window_manova(&params(), 1.0), Err(Error::EmptyWindow { .. })));
        assert!(bulk_window_manova(&params(), -0.1).is_err());
    }

    #[test]
    fn product_window_examples() {
        let e = support_edges(&params());
        assert_eq!(bulk_window_product(&params(), 0.0).unwrap(), (e.mu_minus, e.mu_plus));
        let (lo, hi) = bulk_window_product(&params(), 3.0 / 16.0).unwrap();
        assert!((lo - 1.0).abs() < 1e-7 && (hi - 1.0).abs() < 1e-7);
        let (ml, mh) = bulk_window_manova(&params(), 0.05).unwrap();
        let (pl, ph) = bulk_window_product(&params(), 0.05).unwrap();
        let image = 1.0 / (0.5 * (ml + mh)) - 1.0;
        assert!(pl < image && image < ph);
        assert!(bulk_window_product(&params(), 1.0).is_err());
    }

    #[test]
    fn plan_validation() {
        let mut plan = small_plan(ExperimentKind::Locallaw);
        assert!(plan.validate().is_ok());
        plan.trials = 0;
        assert!(plan.validate().is_err());
        let mut plan = small_plan(ExperimentKind::Locallaw);
        plan.e_grid = 10;
        assert!(plan.validate().is_err());
        let mut plan = small_plan(ExperimentKind::Counting);
        plan.counting_points = 4;
        assert!(plan.validate().is_err());
        let mut plan = small_plan(ExperimentKind::Deloc);
        plan.kappa = 5.0;
        assert!(matches!(deloc_experiment(&plan), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn quantiles_are_ordered() {
        let s = MetricSummary::from_values("x", vec![5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-0.5))).collect();
        let fit = fit_log_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        let doubled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, 2.0 * y)).collect();
        let fit2 = fit_log_slope(&doubled).unwrap();
        assert!((fit2.slope - fit.slope).abs() < 1e-12);
        assert!((fit2.intercept - fit.intercept - 2f64.ln()).abs() < 1e-12);
        assert!(fit_log_slope(&[(4.0, 1.0), (4.0, 1.0), (4.0, 1.0)]).is_err());
        assert!(fit_log_slope(&[(4.0, 1.0), (5.0, 1.0), (6.0, 1.0)]).is_err());
    }

    #[test]
    fn scaling_needs_spread() {
        let mut plan = small_plan(ExperimentKind::Scaling);
        plan.n_list = vec![40, 50];
        assert!(matches!(scaling_study(&plan), Err(Error::Validation(_))));
    }

    #[test]
    fn locallaw_small_run() {
        let plan = small_plan(ExperimentKind::Locallaw);
        let out = locallaw_experiment(&plan).unwrap();
        assert_eq!(out.runs.len(), 1);
        let run = &out.runs[0];
        assert_eq!(run.summary.trials, 3);
        assert_eq!(run.summary.successes + run.summary.failures, 3);
        assert_eq!(run.locallaw_rows.len(), 3 * 50);
        for r in &run.records {
            let direct = r.sup_stieltjes_error.unwrap();
            let mapped = r.sup_mapped_error.unwrap();
            assert!((direct - mapped).abs() <= 1e-9, "{direct} vs {mapped}");
        }
        let m = run.summary.metric("sup_stieltjes_error").unwrap();
        assert!(m.min <= m.q1 && m.q1 <= m.median && m.median <= m.q3 && m.q3 <= m.max);
        out.check_failures().unwrap();
    }

    #[test]
    fn results_do_not_depend_on_threads() {
        let mut plan = small_plan(ExperimentKind::Counting);
        plan.threads = 1;
        let one = counting_experiment(&plan).unwrap();
        plan.threads = 3;
        let three = counting_experiment(&plan).unwrap();
        assert_eq!(one.runs[0].counting_rows, three.runs[0].counting_rows);
    }

    #[test]
    fn trial_failures_are_counted() {
        let records = vec![
            TrialRecord { rigidity_deviation: Some(1.0), ..TrialRecord::empty(0, 10, 0.1) },
            TrialRecord::failed(1, 10, 0.1, &Error::Singular { condition: 1e13 }),
        ];
        let s = SummaryTable::from_records(ExperimentKind::Rigidity, 10, 0.1, 0, &records);
        assert_eq!((s.successes, s.failures), (1, 1));
        assert_eq!(s.metric("rigidity_deviation").unwrap().count, 1);
        let out = ExperimentOutcome {
            plan: small_plan(ExperimentKind::Rigidity),
            runs: vec![RunResult {
                n: 10,
                eta: 0.1,
                records,
                locallaw_rows: vec![],
                counting_rows: vec![],
                summary: s,
            }],
            slope: None,
        };
        assert!(matches!(out.check_failures(), Err(Error::ExperimentThreshold { failed: 1, trials: 2 })));
    }
}
