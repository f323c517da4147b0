//! Recorded sampling history of the target chain and its CSV persistence.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::AcceptCounters;
use crate::error::{Error, Result};
use crate::tempering::SwapStats;

/// Thinned samples of the target chain: grid curve, knot count and
/// log-likelihood at every `thin`-th step.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub meta: TraceMeta,
    steps: Vec<u64>,
    /// Row-major, one row of `z.len()` values per recorded step.
    curves: Vec<f64>,
    ns: Vec<usize>,
    log_liks: Vec<f64>,
}

/// Run-level facts stored next to the sample files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub z: Vec<f64>,
    pub thin: u64,
    pub total_steps: u64,
    pub counters: AcceptCounters,
    pub swaps: Option<SwapStats>,
    pub temperatures: Vec<f64>,
    pub final_log_scale: Option<f64>,
    /// Diagonal of the target chain's adaptive covariance at the end of the run.
    pub adaptive_variance: Option<Vec<f64>>,
    /// Prior bounds on knot values, the default histogram range.
    #[serde(default)]
    pub value_range: Option<(f64, f64)>,
}

impl TraceMeta {
    pub fn new(z: Vec<f64>, thin: u64) -> Self {
        Self {
            z,
            thin,
            total_steps: 0,
            counters: AcceptCounters::default(),
            swaps: None,
            temperatures: vec![1.0],
            final_log_scale: None,
            adaptive_variance: None,
            value_range: None,
        }
    }
}

pub const TRACE_LL: &str = "trace_ll.csv";
pub const TRACE_N: &str = "trace_n.csv";
pub const TRACE_GRID: &str = "trace_grid.csv";
pub const TRACE_META: &str = "trace_meta.json";

impl RunTrace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            steps: Vec::new(),
            curves: Vec::new(),
            ns: Vec::new(),
            log_liks: Vec::new(),
        }
    }

    pub fn push(&mut self, step: u64, curve: &[f64], n: usize, log_lik: f64) {
        assert_eq!(curve.len(), self.n_grid(), "curve length must match the grid");
        self.steps.push(step);
        self.curves.extend_from_slice(curve);
        self.ns.push(n);
        self.log_liks.push(log_lik);
    }

    pub fn n_grid(&self) -> usize {
        self.meta.z.len()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn curve(&self, i: usize) -> &[f64] {
        let g = self.n_grid();
        &self.curves[i * g..(i + 1) * g]
    }

    pub fn curves(&self) -> impl Iterator<Item = &[f64]> {
        self.curves.chunks_exact(self.n_grid().max(1))
    }

    pub fn ns(&self) -> &[usize] {
        &self.ns
    }

    pub fn log_liks(&self) -> &[f64] {
        &self.log_liks
    }

    /// Values at grid point `j` across all recorded samples.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.curves().map(|c| c[j]).collect()
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut ll = csv::Writer::from_path(dir.join(TRACE_LL))?;
        ll.write_record(["step", "loglik"])?;
        let mut nw = csv::Writer::from_path(dir.join(TRACE_N))?;
        nw.write_record(["step", "n"])?;
        for ((s, l), n) in self.steps.iter().zip(&self.log_liks).zip(&self.ns) {
            ll.write_record([s.to_string(), l.to_string()])?;
            nw.write_record([s.to_string(), n.to_string()])?;
        }
        ll.flush()?;
        nw.flush()?;

        let mut gw = csv::Writer::from_path(dir.join(TRACE_GRID))?;
        let mut header = vec!["step".to_string()];
        header.extend((1..=self.n_grid()).map(|j| format!("f{j}")));
        gw.write_record(&header)?;
        let mut row = Vec::with_capacity(self.n_grid() + 1);
        for (i, s) in self.steps.iter().enumerate() {
            row.clear();
            row.push(s.to_string());
            row.extend(self.curve(i).iter().map(f64::to_string));
            gw.write_record(&row)?;
        }
        gw.flush()?;

        let mut meta = BufWriter::new(File::create(dir.join(TRACE_META))?);
        serde_json::to_writer_pretty(&mut meta, &self.meta)?;
        meta.write_all(b"\n")?;
        meta.flush()?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: TraceMeta = serde_json::from_reader(BufReader::new(File::open(dir.join(TRACE_META))?))?;
        let mut trace = RunTrace::new(meta);
        let g = trace.n_grid();

        let mut rdr = csv::Reader::from_path(dir.join(TRACE_GRID))?;
        if rdr.headers()?.len() != g + 1 {
            return Err(Error::Data(format!(
                "{TRACE_GRID} has {} columns, expected {}",
                rdr.headers()?.len(),
                g + 1
            )));
        }
        for rec in rdr.records() {
            let rec = rec?;
            trace.steps.push(parse(&rec[0])?);
            for v in rec.iter().skip(1) {
                trace.curves.push(parse(v)?);
            }
        }
        let mut rdr = csv::Reader::from_path(dir.join(TRACE_N))?;
        for rec in rdr.records() {
            trace.ns.push(parse(&rec?[1])?);
        }
        let mut rdr = csv::Reader::from_path(dir.join(TRACE_LL))?;
        for rec in rdr.records() {
            trace.log_liks.push(parse(&rec?[1])?);
        }
        if trace.ns.len() != trace.len() || trace.log_liks.len() != trace.len() {
            return Err(Error::Data("trace files disagree on the number of samples".into()));
        }
        Ok(trace)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Data(format!("cannot parse `{s}`")))
}
