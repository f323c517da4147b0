//! Replicated runs of one configuration with per-replica outputs, the
//! pairwise convergence harness and a reproducibility record.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{acf, pair_harness, posterior_summary, write_acf_csv, write_variance_csv, HarnessSummary};
use crate::error::{Error, Result};
use crate::sampler::run_sampler;
use crate::trace::RunTrace;

pub const SEED_RULE: &str = "seed_i = splitmix64(master ^ splitmix64(i + 1))";

/// One round of the SplitMix64 generator.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` under master seed `master`.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: u32,
    pub package_version: String,
    pub config_sha256: String,
    pub sampler: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub replica_seeds: Vec<u64>,
    pub harness: Option<HarnessSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub traces: Vec<RunTrace>,
    pub meta: RunMeta,
}

pub fn replica_dir(output_dir: &Path, index: usize) -> PathBuf {
    output_dir.join(format!("replica_{index:02}"))
}

/// Hex SHA-256 of the config's canonical JSON form, ignoring the output directory.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    let mut c = config.clone();
    c.output_dir = PathBuf::new();
    let bytes = serde_json::to_vec(&c)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Runs every replica (in parallel on `threads` workers), then writes traces,
/// posterior summaries, pairwise convergence reports and `run_meta.json`.
pub fn run_experiment(config: &RunConfig, threads: usize) -> Result<ExperimentReport> {
    config.validate()?;
    let problem = config.build_problem()?;
    let out = config.output_dir.clone();
    fs::create_dir_all(&out)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", out.display())))?;

    let seeds: Vec<u64> = (0..config.replicas as u64).map(|i| replica_seed(config.seed, i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let traces: Vec<RunTrace> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_sampler(&problem, &config.sampler, seed))
            .collect::<Result<_>>()
    })?;

    {
        let mut w = fs::File::create(out.join("data.csv"))?;
        problem.data().write_csv(&mut w)?;
    }
    let range = (problem.prior().a_min, problem.prior().a_max);
    for (i, trace) in traces.iter().enumerate() {
        let dir = replica_dir(&out, i);
        trace.write_dir(&dir)?;
        let summary = posterior_summary(trace, config.summary_discard, config.density_bins, range)?;
        summary.write_dir(&dir)?;
        if let Some(var) = &trace.meta.adaptive_variance {
            write_variance_csv(&trace.meta.z, var, &summary.variance, &dir.join("trace_var.csv"))?;
        }
        let first = trace.column(0);
        if first.len() > config.acf_lags {
            if let Ok(r) = acf(&first, config.acf_lags) {
                write_acf_csv(&r, &dir.join("acf.csv"))?;
            }
        }
    }

    let harness = if traces.len() >= 2 {
        let report = pair_harness(&traces, config.monitor_stride)?;
        let conv_dir = out.join("convergence");
        fs::create_dir_all(&conv_dir)?;
        for p in &report.pairs {
            p.report
                .write_csv(&conv_dir.join(format!("pair_{:02}_{:02}.csv", p.run_a, p.run_b)))?;
        }
        report.write_pairs_csv(&out.join("pairs.csv"))?;
        Some(report.summary)
    } else {
        None
    };

    let meta = RunMeta {
        schema_version: config.schema_version,
        package_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(config)?,
        sampler: config.sampler.kind.label().to_string(),
        master_seed: config.seed,
        seed_rule: SEED_RULE.to_string(),
        replica_seeds: seeds,
        harness,
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(out.join("run_meta.json"), text)?;

    Ok(ExperimentReport {
        output_dir: out,
        traces,
        meta,
    })
}
