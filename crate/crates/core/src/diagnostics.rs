//! Between-run convergence statistics, autocorrelation and posterior summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::RunTrace;

/// Both statistics must fall below this for two runs to count as converged.
pub const RC_THRESHOLD: f64 = 0.2;

/// Per-grid-point mean and standard deviation over a sample window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl WindowStats {
    /// Population statistics of the given curves.
    pub fn from_curves<'a>(curves: impl Iterator<Item = &'a [f64]>, n_grid: usize) -> Option<Self> {
        let mut sum = vec![0.0; n_grid];
        let mut count = 0usize;
        let rows: Vec<&[f64]> = curves.collect();
        for c in &rows {
            for (s, v) in sum.iter_mut().zip(c.iter()) {
                *s += v;
            }
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; n_grid];
        for c in &rows {
            for ((q, v), m) in sq.iter_mut().zip(c.iter()).zip(&mean) {
                *q += (v - m) * (v - m);
            }
        }
        let sd = sq.iter().map(|q| (q / count as f64).sqrt()).collect();
        Some(Self { mean, sd })
    }
}

/// `(R_c1, R_c2)`: grid-averaged absolute differences of means and of
/// standard deviations, each relative to the average standard deviation.
///
/// A point whose pooled deviation is zero contributes 0 when the compared
/// quantities are equal and `+inf` otherwise.
pub fn rc_stats(a: &WindowStats, b: &WindowStats) -> (f64, f64) {
    let n = a.mean.len();
    assert_eq!(n, b.mean.len(), "window stats must share a grid");
    let ratio = |num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let (mut r1, mut r2) = (0.0, 0.0);
    for i in 0..n {
        let den = (a.sd[i] + b.sd[i]) / 2.0;
        r1 += ratio((a.mean[i] - b.mean[i]).abs(), den);
        r2 += ratio((a.sd[i] - b.sd[i]).abs(), den);
    }
    (r1 / n as f64, r2 / n as f64)
}

pub fn is_converged(rc: (f64, f64)) -> bool {
    rc.0 < RC_THRESHOLD && rc.1 < RC_THRESHOLD
}

/// Normalized sample autocorrelation for lags `0..=max_lag`.
pub fn acf(trace: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if trace.len() <= max_lag {
        return Err(Error::Diagnostics(format!(
            "trace of length {} is too short for lag {max_lag}",
            trace.len()
        )));
    }
    let mean = trace.iter().sum::<f64>() / trace.len() as f64;
    let dev: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let var: f64 = dev.iter().map(|d| d * d).sum();
    if !(var > 0.0) {
        return Err(Error::Diagnostics("autocorrelation of a constant trace is undefined".into()));
    }
    Ok((0..=max_lag)
        .map(|lag| dev.iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / var)
        .collect())
}

/// Window statistics of one trace at every monitor step `stride, 2*stride, ...`.
/// The window at step `t` holds the recorded samples with step in `(t/2, t]`.
pub fn monitor_stats(trace: &RunTrace, stride: u64) -> Vec<(u64, Option<WindowStats>)> {
    assert!(stride > 0, "monitor stride must be positive");
    let steps = trace.steps();
    let last = trace.meta.total_steps.max(steps.last().copied().unwrap_or(0));
    (1..=last / stride)
        .map(|k| {
            let t = k * stride;
            let lo = steps.partition_point(|&s| s <= t / 2);
            let hi = steps.partition_point(|&s| s <= t);
            let stats = WindowStats::from_curves((lo..hi).map(|i| trace.curve(i)), trace.n_grid());
            (t, stats)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub monitor_steps: Vec<u64>,
    pub rc1: Vec<f64>,
    pub rc2: Vec<f64>,
    /// First monitor step at which both statistics fall below the threshold.
    pub convergence_length: Option<u64>,
}

impl ConvergenceReport {
    pub fn from_monitors(a: &[(u64, Option<WindowStats>)], b: &[(u64, Option<WindowStats>)]) -> Self {
        let mut report = Self {
            monitor_steps: Vec::new(),
            rc1: Vec::new(),
            rc2: Vec::new(),
            convergence_length: None,
        };
        for ((t, sa), (tb, sb)) in a.iter().zip(b) {
            debug_assert_eq!(t, tb);
            let (Some(sa), Some(sb)) = (sa, sb) else { continue };
            let rc = rc_stats(sa, sb);
            report.monitor_steps.push(*t);
            report.rc1.push(rc.0);
            report.rc2.push(rc.1);
            if report.convergence_length.is_none() && is_converged(rc) {
                report.convergence_length = Some(*t);
            }
        }
        report
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["monitor_step", "rc1", "rc2"])?;
        for ((t, a), b) in self.monitor_steps.iter().zip(&self.rc1).zip(&self.rc2) {
            w.write_record([t.to_string(), a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pairwise convergence report for two runs.
pub fn convergence_length(a: &RunTrace, b: &RunTrace, stride: u64) -> ConvergenceReport {
    ConvergenceReport::from_monitors(&monitor_stats(a, stride), &monitor_stats(b, stride))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub run_a: usize,
    pub run_b: usize,
    pub report: ConvergenceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessSummary {
    pub pairs: usize,
    pub converged: usize,
    pub mean_length: Option<f64>,
    pub median_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub pairs: Vec<PairResult>,
    pub summary: HarnessSummary,
}

impl HarnessReport {
    /// `run_a,run_b,convergence_length` with an empty length for pairs that never converged.
    pub fn write_pairs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["run_a", "run_b", "convergence_length"])?;
        for p in &self.pairs {
            let len = p.report.convergence_length.map(|l| l.to_string()).unwrap_or_default();
            w.write_record([p.run_a.to_string(), p.run_b.to_string(), len])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates every unordered pair of runs.
pub fn pair_harness(runs: &[RunTrace], stride: u64) -> Result<HarnessReport> {
    if runs.len() < 2 {
        return Err(Error::Diagnostics(format!("pair harness needs at least 2 runs, got {}", runs.len())));
    }
    let monitors: Vec<_> = runs.iter().map(|r| monitor_stats(r, stride)).collect();
    let mut pairs = Vec::with_capacity(runs.len() * (runs.len() - 1) / 2);
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            pairs.push(PairResult {
                run_a: i,
                run_b: j,
                report: ConvergenceReport::from_monitors(&monitors[i], &monitors[j]),
            });
        }
    }
    let mut lengths: Vec<u64> = pairs.iter().filter_map(|p| p.report.convergence_length).collect();
    lengths.sort_unstable();
    let summary = HarnessSummary {
        pairs: pairs.len(),
        converged: lengths.len(),
        mean_length: (!lengths.is_empty()).then(|| lengths.iter().sum::<u64>() as f64 / lengths.len() as f64),
        median_length: median(&lengths),
    };
    Ok(HarnessReport { pairs, summary })
}

fn median(sorted: &[u64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2] as f64),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub z: Vec<f64>,
    pub mean: Vec<f64>,
    /// Per-point variance of the retained curves.
    pub variance: Vec<f64>,
    pub value_range: (f64, f64),
    pub bins: usize,
    /// Row-major `z.len() x bins` counts.
    pub density: Vec<u64>,
    pub n_hist: BTreeMap<usize, u64>,
    pub retained: usize,
}

impl PosteriorSummary {
    pub fn density_at(&self, z_index: usize, bin: usize) -> u64 {
        self.density[z_index * self.bins + bin]
    }

    pub fn column(&self, z_index: usize) -> &[u64] {
        &self.density[z_index * self.bins..(z_index + 1) * self.bins]
    }

    /// Normalized knot-count distribution.
    pub fn n_distribution(&self) -> BTreeMap<usize, f64> {
        let total: u64 = self.n_hist.values().sum();
        self.n_hist.iter().map(|(&n, &c)| (n, c as f64 / total as f64)).collect()
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("summary_mean.csv"))?;
        w.write_record(["z", "mean"])?;
        for (z, m) in self.z.iter().zip(&self.mean) {
            w.write_record([z.to_string(), m.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("density.csv"))?;
        w.write_record(["z_index", "bin_index", "count"])?;
        for j in 0..self.z.len() {
            for (b, c) in self.column(j).iter().enumerate() {
                w.write_record([j.to_string(), b.to_string(), c.to_string()])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("n_hist.csv"))?;
        w.write_record(["n", "count"])?;
        for (n, c) in &self.n_hist {
            w.write_record([n.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean curve, per-column value histogram and knot-count histogram of the
/// samples recorded after `discard_fraction` of the run.
pub fn posterior_summary(
    trace: &RunTrace,
    discard_fraction: f64,
    bins: usize,
    value_range: (f64, f64),
) -> Result<PosteriorSummary> {
    if bins == 0 || !(value_range.0 < value_range.1) {
        return Err(Error::Diagnostics("histogram needs bins > 0 and a non-empty value range".into()));
    }
    let cut = (discard_fraction * trace.meta.total_steps as f64) as u64;
    let start = trace.steps().partition_point(|&s| s <= cut);
    let retained = trace.len() - start;
    if retained == 0 {
        return Err(Error::Diagnostics("no samples retained after burn-in".into()));
    }
    let g = trace.n_grid();
    let stats = WindowStats::from_curves((start..trace.len()).map(|i| trace.curve(i)), g)
        .expect("retained window is non-empty");
    let mut density = vec![0u64; g * bins];
    let width = (value_range.1 - value_range.0) / bins as f64;
    for i in start..trace.len() {
        for (j, &v) in trace.curve(i).iter().enumerate() {
            let b = (((v - value_range.0) / width).floor().max(0.0) as usize).min(bins - 1);
            density[j * bins + b] += 1;
        }
    }
    let mut n_hist = BTreeMap::new();
    for &n in &trace.ns()[start..] {
        *n_hist.entry(n).or_insert(0) += 1;
    }
    Ok(PosteriorSummary {
        z: trace.meta.z.clone(),
        mean: stats.mean,
        variance: stats.sd.iter().map(|s| s * s).collect(),
        value_range,
        bins,
        density,
        n_hist,
        retained,
    })
}

/// `acf.csv`: `lag,acf`.
pub fn write_acf_csv(values: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lag", "acf"])?;
    for (lag, v) in values.iter().enumerate() {
        w.write_record([lag.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `trace_var.csv`: recorded adaptive variance against posterior variance.
pub fn write_variance_csv(z: &[f64], adaptive: &[f64], posterior: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["z", "adaptive_variance", "posterior_variance"])?;
    for ((z, a), p) in z.iter().zip(adaptive).zip(posterior) {
        w.write_record([z.to_string(), a.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
