//! Simulation designs, selection/estimation metrics and replicate aggregation.
//!
//! Every replicate draws from ChaCha8 streams keyed by `(seed, rep, purpose)`,
//! so the design, the signal and the labels of a replicate can each be
//! regenerated independently of the others and of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavi::{fit, FitConfig};
use crate::error::{check_len, Error, Result};
use crate::model::{Coefficients, Dataset};
use crate::special::sigmoid;
use crate::summary::{spike_slab_interval, Summary};

/// Values of the `s` leading nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    /// Standard deviation of the iid Gaussian design entries.
    pub sigma_x: f64,
    /// Number of nonzero coefficients.
    pub s: usize,
    pub signal: Signal,
    pub n_reps: usize,
    pub seed: u64,
}

impl SimDesign {
    /// n = 250, p = 500, N(0, 1) design, theta0 = (2, 2, 0, ..., 0).
    pub fn test0(n_reps: usize, seed: u64) -> Self {
        SimDesign {
            n: 250,
            p: 500,
            sigma_x: 1.0,
            s: 2,
            signal: Signal::Constant { value: 2.0 },
            n_reps,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidParameter("n and p must be positive".into()));
        }
        if self.s > self.p {
            return Err(Error::InvalidParameter(format!(
                "sparsity {} exceeds p = {}",
                self.s, self.p
            )));
        }
        if self.n_reps == 0 {
            return Err(Error::InvalidParameter("n_reps must be at least 1".into()));
        }
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_x must be positive, got {}",
                self.sigma_x
            )));
        }
        if let Signal::Uniform { lo, hi } = self.signal {
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "uniform signal needs lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Design = 0,
    Signal = 1,
    Labels = 2,
}

fn stream(seed: u64, rep: usize, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 8) | purpose as u64);
    rng
}

/// Draws replicate `rep` of the design: the dataset and the true coefficients.
pub fn generate(design: &SimDesign, rep: usize) -> Result<(Dataset, Coefficients)> {
    design.validate()?;
    let (n, p) = (design.n, design.p);

    let mut rng = stream(design.seed, rep, Stream::Design);
    let columns: Vec<f64> = (0..n * p)
        .map(|_| design.sigma_x * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut rng = stream(design.seed, rep, Stream::Signal);
    let mut theta = vec![0.0; p];
    for t in theta.iter_mut().take(design.s) {
        *t = match design.signal {
            Signal::Constant { value } => value,
            Signal::Uniform { lo, hi } => rng.random_range(lo..hi),
        };
    }

    let mut labels = vec![0u8; n];
    let mut rng = stream(design.seed, rep, Stream::Labels);
    let mut eta = vec![0.0; n];
    for (j, &t) in theta.iter().enumerate() {
        if t != 0.0 {
            for (e, &x) in eta.iter_mut().zip(&columns[j * n..(j + 1) * n]) {
                *e += x * t;
            }
        }
    }
    for (y, &e) in labels.iter_mut().zip(&eta) {
        *y = u8::from(rng.random::<f64>() < sigmoid(e));
    }

    Ok((Dataset::from_column_major(n, p, columns, labels)?, Coefficients(theta)))
}

/// Per-replicate selection and estimation quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tpr: f64,
    pub fdr: f64,
    pub l2_error: f64,
    pub mspe: f64,
}

/// TPR, FDR, l2 error of the posterior mean and the root mean squared
/// difference between fitted and true probabilities at the design points.
///
/// FDR is 0 for an empty selection; TPR is 1 when the truth has no signal.
pub fn metrics(true_theta: &Coefficients, summary: &Summary, data: &Dataset) -> Result<Metrics> {
    let p = true_theta.len();
    check_len("posterior mean", p, summary.posterior_mean.len())?;
    check_len("design columns", p, data.p())?;
    if let Some(&j) = summary.selected.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidParameter(format!("selected index {j} out of range")));
    }
    let s = true_theta.0.iter().filter(|&&t| t != 0.0).count();
    let true_hits = summary.selected.iter().filter(|&&j| true_theta.0[j] != 0.0).count();
    let false_hits = summary.selected.len() - true_hits;
    let tpr = if s == 0 { 1.0 } else { true_hits as f64 / s as f64 };
    let fdr = if summary.selected.is_empty() {
        0.0
    } else {
        false_hits as f64 / summary.selected.len() as f64
    };
    let l2_error = summary
        .posterior_mean
        .iter()
        .zip(&true_theta.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let fitted = data.linear_predictor(&summary.posterior_mean)?;
    let truth = data.linear_predictor(&true_theta.0)?;
    let mspe = (fitted
        .iter()
        .zip(&truth)
        .map(|(a, b)| (sigmoid(*a) - sigmoid(*b)).powi(2))
        .sum::<f64>()
        / data.n() as f64)
        .sqrt();
    Ok(Metrics {
        tpr,
        fdr,
        l2_error,
        mspe,
    })
}

/// Interval coverage split by whether the true coefficient is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// `None` when the truth has no coefficient of that kind.
    pub nonzero_coverage: Option<f64>,
    pub nonzero_length: Option<f64>,
    pub zero_coverage: Option<f64>,
    pub zero_length: Option<f64>,
}

/// Coverage of `theta0` by the summary's marginal intervals.
pub fn coverage(true_theta: &Coefficients, summary: &Summary) -> Result<Coverage> {
    check_len("intervals", true_theta.len(), summary.intervals.len())?;
    let mut acc = [(0usize, 0usize, 0.0f64); 2];
    for (iv, &t) in summary.intervals.iter().zip(&true_theta.0) {
        let slot = &mut acc[usize::from(t != 0.0)];
        slot.0 += 1;
        slot.1 += usize::from(iv.contains(t));
        slot.2 += iv.len();
    }
    let ratio = |(count, hit, _): (usize, usize, f64)| (count > 0).then(|| hit as f64 / count as f64);
    let length = |(count, _, len): (usize, usize, f64)| (count > 0).then(|| len / count as f64);
    Ok(Coverage {
        nonzero_coverage: ratio(acc[1]),
        nonzero_length: length(acc[1]),
        zero_coverage: ratio(acc[0]),
        zero_length: length(acc[0]),
    })
}

/// A labelled fit configuration compared across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub method: String,
    pub rep: usize,
    pub metrics: Metrics,
    pub coverage: Option<Coverage>,
    pub selected_size: usize,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: String,
    pub rep: usize,
    pub message: String,
}

/// Mean and sample standard deviation (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanSd {
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

/// One row of the method comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub tpr: MeanSd,
    pub fdr: MeanSd,
    pub l2_error: MeanSd,
    pub mspe: MeanSd,
    pub runtime_s: MeanSd,
    pub completed: usize,
}

/// One row of the interval coverage table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: String,
    pub level: f64,
    pub nonzero_coverage: MeanSd,
    pub nonzero_length: MeanSd,
    pub zero_coverage: MeanSd,
    pub zero_length: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub design: SimDesign,
    pub threshold: f64,
    pub rows: Vec<MetricsRow>,
    pub coverage: Vec<CoverageRow>,
    pub replicates: Vec<ReplicateRecord>,
    pub failures: Vec<Failure>,
}

/// Fits `variant` to replicate `rep` and scores the result.
pub fn run_replicate(
    design: &SimDesign,
    rep: usize,
    variant: &Variant,
    threshold: f64,
    level: Option<f64>,
) -> Result<ReplicateRecord> {
    let (data, theta0) = generate(design, rep)?;
    let result = fit(&data, &variant.fit)?;
    let summary = Summary::new(&result.state, threshold, level.unwrap_or(0.95))?;
    let m = metrics(&theta0, &summary, &data)?;
    let cov = match level {
        Some(_) => Some(coverage(&theta0, &summary)?),
        None => None,
    };
    Ok(ReplicateRecord {
        method: variant.label.clone(),
        rep,
        metrics: m,
        coverage: cov,
        selected_size: summary.selected.len(),
        iterations: result.iterations,
        converged: result.converged,
        runtime_s: result.wall_time_seconds,
    })
}

fn aggregate(method: &str, records: &[&ReplicateRecord]) -> MetricsRow {
    let col = |f: fn(&ReplicateRecord) -> f64| MeanSd::of(&records.iter().map(|r| f(r)).collect::<Vec<_>>());
    MetricsRow {
        method: method.to_string(),
        tpr: col(|r| r.metrics.tpr),
        fdr: col(|r| r.metrics.fdr),
        l2_error: col(|r| r.metrics.l2_error),
        mspe: col(|r| r.metrics.mspe),
        runtime_s: col(|r| r.runtime_s),
        completed: records.len(),
    }
}

fn aggregate_coverage(method: &str, level: f64, records: &[&ReplicateRecord]) -> CoverageRow {
    let col = |f: fn(&Coverage) -> Option<f64>| {
        MeanSd::of(
            &records
                .iter()
                .filter_map(|r| r.coverage.as_ref().and_then(f))
                .collect::<Vec<_>>(),
        )
    };
    CoverageRow {
        method: method.to_string(),
        level,
        nonzero_coverage: col(|c| c.nonzero_coverage),
        nonzero_length: col(|c| c.nonzero_length),
        zero_coverage: col(|c| c.zero_coverage),
        zero_length: col(|c| c.zero_length),
    }
}

/// Runs every variant on `design.n_reps` replicates (in parallel) and
/// aggregates mean and standard deviation per variant. With `level` set, the
/// marginal interval coverage table is filled as well.
///
/// Replicates whose fit fails are listed in `failures` and left out of the means.
pub fn run_experiment(
    design: &SimDesign,
    variants: &[Variant],
    threshold: f64,
    level: Option<f64>,
) -> Result<ExperimentReport> {
    design.validate()?;
    if variants.is_empty() {
        return Err(Error::InvalidParameter("at least one variant is required".into()));
    }
    for v in variants {
        v.fit.validate()?;
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if let Some(l) = level {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {l}")));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..design.n_reps).map(move |r| (v, r)))
        .collect();
    let outcomes: Vec<(usize, usize, Result<ReplicateRecord>)> = jobs
        .into_par_iter()
        .map(|(v, r)| (v, r, run_replicate(design, r, &variants[v], threshold, level)))
        .collect();

    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (v, rep, outcome) in outcomes {
        match outcome {
            Ok(rec) => replicates.push(rec),
            Err(e) => failures.push(Failure {
                method: variants[v].label.clone(),
                rep,
                message: e.to_string(),
            }),
        }
    }

    let mut rows = Vec::new();
    let mut coverage_rows = Vec::new();
    for v in variants {
        let recs: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.method == v.label).collect();
        rows.push(aggregate(&v.label, &recs));
        if let Some(l) = level {
            coverage_rows.push(aggregate_coverage(&v.label, l, &recs));
        }
    }
    Ok(ExperimentReport {
        design: design.clone(),
        threshold,
        rows,
        coverage: coverage_rows,
        replicates,
        failures,
    })
}

/// [`run_experiment`] with the coverage table enabled at `level`.
pub fn coverage_experiment(
    design: &SimDesign,
    variants: &[Variant],
    threshold: f64,
    level: f64,
) -> Result<ExperimentReport> {
    run_experiment(design, variants, threshold, Some(level))
}

/// Coverage of a state that was never fitted (prior-only `gamma`), useful as
/// a plumbing check and as a baseline.
pub fn prior_only_coverage(true_theta: &Coefficients, gamma: f64, level: f64) -> Coverage {
    let (mu, sigma) = (0.0, 1.0);
    let iv = spike_slab_interval(gamma, mu, sigma, level);
    let summary = Summary {
        posterior_mean: vec![gamma * mu; true_theta.len()],
        selected: Vec::new(),
        threshold: 0.5,
        intervals: vec![iv; true_theta.len()],
        level,
    };
    coverage(true_theta, &summary).expect("lengths agree by construction")
}

pub const METRICS_CSV_HEADER: &str =
    "method,tpr_mean,tpr_sd,fdr_mean,fdr_sd,l2_mean,l2_sd,mspe_mean,mspe_sd,time_mean,time_sd";

pub const COVERAGE_CSV_HEADER: &str = "method,level,nonzero_coverage_mean,nonzero_coverage_sd,nonzero_length_mean,nonzero_length_sd,zero_coverage_mean,zero_coverage_sd,zero_length_mean,zero_length_sd";

impl ExperimentReport {
    /// Method comparison table as CSV.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(METRICS_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.method,
                r.tpr.mean,
                r.tpr.sd,
                r.fdr.mean,
                r.fdr.sd,
                r.l2_error.mean,
                r.l2_error.sd,
                r.mspe.mean,
                r.mspe.sd,
                r.runtime_s.mean,
                r.runtime_s.sd
            ));
        }
        out
    }

    pub fn coverage_csv(&self) -> String {
        let mut out = String::from(COVERAGE_CSV_HEADER);
        out.push('\n');
        for r in &self.coverage {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.method,
                r.level,
                r.nonzero_coverage.mean,
                r.nonzero_coverage.sd,
                r.nonzero_length.mean,
                r.nonzero_length.sd,
                r.zero_coverage.mean,
                r.zero_coverage.sd,
                r.zero_length.mean,
                r.zero_length.sd
            ));
        }
        out
    }

    /// Copy with every timing field zeroed, for byte-level reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.runtime_s = MeanSd { mean: 0.0, sd: 0.0 };
        }
        for r in &mut out.replicates {
            r.runtime_s = 0.0;
        }
        out
    }
}
