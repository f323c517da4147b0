//! JSON run configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::beam::{BeamForward, BeamSpec};
use crate::error::{Error, Result};
use crate::generate::GeneratorSpec;
use crate::grid::CandidateGrid;
use crate::likelihood::{Dataset, ForwardModel, IdentityForward};
use crate::model::BasisKind;
use crate::prior::PriorSpec;
use crate::problem::Problem;
use crate::sampler::SamplerSettings;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Headed `x,d` CSV; relative paths resolve against the config file's directory.
    Csv { path: PathBuf, noise_sd: f64 },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForwardConfig {
    Identity,
    Beam(BeamSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub sampler: SamplerSettings,
    pub basis: BasisKind,
    pub grid: GridConfig,
    pub prior: PriorSpec,
    pub data: DataSource,
    #[serde(default = "identity")]
    pub forward: ForwardConfig,
    #[serde(default = "default_monitor_stride")]
    pub monitor_stride: u64,
    /// Fraction of each run discarded before posterior summaries.
    #[serde(default = "default_summary_discard")]
    pub summary_discard: f64,
    #[serde(default = "default_density_bins")]
    pub density_bins: usize,
    #[serde(default = "default_acf_lags")]
    pub acf_lags: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn identity() -> ForwardConfig {
    ForwardConfig::Identity
}

fn default_monitor_stride() -> u64 {
    10_000
}

fn default_summary_discard() -> f64 {
    0.5
}

fn default_density_bins() -> usize {
    200
}

fn default_acf_lags() -> usize {
    100
}

fn default_replicas() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DataSource::Csv { path, .. } = &mut cfg.data {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if !path.exists() {
                return Err(Error::Config(format!("data file {} does not exist", path.display())));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.sampler.validate()?;
        if self.replicas == 0 {
            return Err(Error::Config("at least one replica is required".into()));
        }
        if self.monitor_stride == 0 || self.density_bins == 0 {
            return Err(Error::Config("monitor stride and density bins must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.summary_discard) {
            return Err(Error::Config("summary discard fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Csv { path, noise_sd } => Dataset::from_csv_path(path, *noise_sd),
            DataSource::Generator(g) => g.generate(),
        }
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let grid = CandidateGrid::new(self.grid.x_lo, self.grid.x_hi, self.grid.n_points)?;
        let forward: Arc<dyn ForwardModel> = match &self.forward {
            ForwardConfig::Identity => Arc::new(IdentityForward),
            ForwardConfig::Beam(spec) => Arc::new(BeamForward::new(spec)?),
        };
        Problem::new(grid, self.basis, self.prior, self.load_data()?, forward)
    }
}
