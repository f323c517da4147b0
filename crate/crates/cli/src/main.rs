//! `knotfit` command line: run experiments, generate datasets, compare two
//! traces and summarize one.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use knotfit::config::RunConfig;
use knotfit::diagnostics::{convergence_length, posterior_summary};
use knotfit::experiment::run_experiment;
use knotfit::generate::GeneratorSpec;
use knotfit::RunTrace;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(#[from] knotfit::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "knotfit", version, about = "Free-knot curve fitting with reversible jump samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every replica of an experiment config and write traces, summaries and convergence reports.
    Run {
        config: PathBuf,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of independent replicas (overrides the config).
        #[arg(long)]
        replicas: Option<usize>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write a synthetic dataset described by a generator JSON file as `x,d` CSV.
    Generate {
        spec: PathBuf,
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pairwise convergence report for two trace directories.
    Diagnose {
        trace_a: PathBuf,
        trace_b: PathBuf,
        /// Monitoring stride in steps.
        #[arg(long, default_value_t = 10_000)]
        stride: u64,
        /// Directory receiving `convergence.csv`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Posterior mean, density histogram and knot-count distribution of one trace.
    Summarize {
        trace_dir: PathBuf,
        /// Fraction of recorded samples discarded from the start.
        #[arg(long, default_value_t = 0.5)]
        discard: f64,
        #[arg(long, default_value_t = 200)]
        bins: usize,
        /// Histogram value range; defaults to the prior bounds stored with the trace.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        range: Option<Vec<f64>>,
        /// Output directory; defaults to the trace directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("knotfit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            seed,
            replicas,
            out,
            threads,
        } => run(&config, seed, replicas, out, threads),
        Command::Generate { spec, out, seed } => generate(&spec, &out, seed),
        Command::Diagnose {
            trace_a,
            trace_b,
            stride,
            out,
        } => diagnose(&trace_a, &trace_b, stride, &out),
        Command::Summarize {
            trace_dir,
            discard,
            bins,
            range,
            out,
        } => summarize(&trace_dir, discard, bins, range, out),
    }
}

fn run(
    path: &Path,
    seed: Option<u64>,
    replicas: Option<usize>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let mut config = RunConfig::from_path(path).map_err(config_err)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(k) = replicas {
        config.replicas = k;
    }
    if let Some(o) = out {
        config.output_dir = o;
    }
    config.validate().map_err(config_err)?;
    config.build_problem().map_err(config_err)?;
    let threads = match threads {
        Some(0) => return Err(CliError::Config("--threads must be positive".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };

    let report = run_experiment(&config, threads)?;
    for (i, t) in report.traces.iter().enumerate() {
        let c = &t.meta.counters;
        let rate = |k: usize| if c.attempts[k] == 0 { 0.0 } else { c.accepts[k] as f64 / c.attempts[k] as f64 };
        println!(
            "replica {i:02} seed {:>20}  accept birth {:.3} death {:.3} move {:.3}  final n {}",
            report.meta.replica_seeds[i],
            rate(0),
            rate(1),
            rate(2),
            t.ns().last().copied().unwrap_or(0),
        );
    }
    if let Some(h) = &report.meta.harness {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.0}"));
        println!(
            "pairs {}  converged {}  mean length {}  median length {}",
            h.pairs,
            h.converged,
            fmt(h.mean_length),
            fmt(h.median_length)
        );
    }
    println!("outputs written to {}", report.output_dir.display());
    Ok(())
}

fn generate(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", spec_path.display())))?;
    let mut spec: GeneratorSpec = serde_json::from_str(&text).map_err(config_err)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let data = spec.generate().map_err(config_err)?;
    let file = std::fs::File::create(out).map_err(knotfit::Error::from)?;
    data.write_csv(file)?;
    println!("{} observations (noise sd {}) written to {}", data.len(), data.noise_sd(), out.display());
    Ok(())
}

fn read_trace(dir: &Path) -> Result<RunTrace, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!("trace directory {} does not exist", dir.display())));
    }
    Ok(RunTrace::read_dir(dir)?)
}

fn diagnose(a: &Path, b: &Path, stride: u64, out: &Path) -> Result<(), CliError> {
    if stride == 0 {
        return Err(CliError::Config("--stride must be positive".into()));
    }
    let (ta, tb) = (read_trace(a)?, read_trace(b)?);
    if ta.meta.z != tb.meta.z {
        return Err(CliError::Config("the two traces use different grids".into()));
    }
    let report = convergence_length(&ta, &tb, stride);
    std::fs::create_dir_all(out).map_err(knotfit::Error::from)?;
    report.write_csv(&out.join("convergence.csv"))?;
    match report.convergence_length {
        Some(len) => println!("converged at step {len}"),
        None => println!("not converged within {} monitoring points", report.monitor_steps.len()),
    }
    Ok(())
}

fn summarize(dir: &Path, discard: f64, bins: usize, range: Option<Vec<f64>>, out: Option<PathBuf>) -> Result<(), CliError> {
    let trace = read_trace(dir)?;
    let range = match range {
        Some(r) => (r[0], r[1]),
        None => trace
            .meta
            .value_range
            .ok_or_else(|| CliError::Config("trace has no stored value range; pass --range".into()))?,
    };
    let summary = posterior_summary(&trace, discard, bins, range).map_err(config_err)?;
    let out = out.unwrap_or_else(|| dir.to_path_buf());
    summary.write_dir(&out)?;
    let (mode, p) = summary
        .n_distribution()
        .into_iter()
        .fold((0, 0.0), |best, (n, p)| if p > best.1 { (n, p) } else { best });
    println!("{} samples retained; modal knot count {mode} (p = {p:.3})", summary.retained);
    Ok(())
}
