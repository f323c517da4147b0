//! Observations, forward models and the Gaussian likelihood.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CandidateGrid;
use crate::model::{BasisKind, Curve, KnotModel};

/// Observed pairs `(x_i, d_i)` with a known noise standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    xs: Vec<f64>,
    ds: Vec<f64>,
    noise_sd: f64,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    x: f64,
    d: f64,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ds: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Data("at least one observation is required".into()));
        }
        if xs.len() != ds.len() {
            return Err(Error::Data(format!(
                "{} coordinates but {} observations",
                xs.len(),
                ds.len()
            )));
        }
        if !(noise_sd > 0.0 && noise_sd.is_finite()) {
            return Err(Error::Data(format!(
                "noise standard deviation must be positive, got {noise_sd}"
            )));
        }
        if xs.iter().chain(&ds).any(|v| !v.is_finite()) {
            return Err(Error::Data("observations must be finite".into()));
        }
        Ok(Self { xs, ds, noise_sd })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    #[inline]
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    #[inline]
    pub fn ds(&self) -> &[f64] {
        &self.ds
    }

    #[inline]
    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn check_domain(&self, grid: &CandidateGrid) -> Result<()> {
        match self.xs.iter().find(|&&x| !grid.contains(x)) {
            Some(&x) => Err(Error::OutOfDomain {
                x,
                lo: grid.x_lo(),
                hi: grid.x_hi(),
            }),
            None => Ok(()),
        }
    }

    /// Reads a headed `x,d` CSV.
    pub fn read_csv<R: Read>(reader: R, noise_sd: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "d"] {
            return Err(Error::Data(format!(
                "expected header `x,d`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut xs, mut ds) = (Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            xs.push(row.x);
            ds.push(row.d);
        }
        Self::new(xs, ds, noise_sd)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, noise_sd: f64) -> Result<Self> {
        Self::read_csv(File::open(path)?, noise_sd)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "d"])?;
        for (x, d) in self.xs.iter().zip(&self.ds) {
            w.write_record([x.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The mapping `g(f, x)` from a curve to predicted observations.
pub trait ForwardModel: Debug + Send + Sync {
    fn predict(&self, curve: &Curve, coords: &[f64]) -> Result<Vec<f64>>;
}

/// Regression: predictions are the curve itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityForward;

impl ForwardModel for IdentityForward {
    fn predict(&self, curve: &Curve, coords: &[f64]) -> Result<Vec<f64>> {
        curve.eval_many(coords)
    }
}

/// `g(f, x) = f(x)`.
pub fn identity_forward(curve: &Curve, coords: &[f64]) -> Result<Vec<f64>> {
    IdentityForward.predict(curve, coords)
}

/// Gaussian log-likelihood of residuals `d_i - pred_i` with scale `sd`.
pub fn gaussian_log_likelihood(ds: &[f64], predicted: &[f64], sd: f64) -> f64 {
    let k = ds.len() as f64;
    let sq: f64 = ds
        .iter()
        .zip(predicted)
        .map(|(d, p)| (d - p) * (d - p))
        .sum();
    -0.5 * k * (2.0 * PI * sd * sd).ln() - sq / (2.0 * sd * sd)
}

/// Log-likelihood of `data` under the curve of `model` mapped through `fwd`.
pub fn log_likelihood(
    model: &KnotModel,
    data: &Dataset,
    fwd: &dyn ForwardModel,
    grid: &CandidateGrid,
    basis: BasisKind,
) -> Result<f64> {
    let curve = Curve::new(model, grid, basis);
    let predicted = fwd.predict(&curve, data.xs())?;
    if predicted.len() != data.len() {
        return Err(Error::Dimension {
            expected: data.len(),
            got: predicted.len(),
        });
    }
    Ok(gaussian_log_likelihood(data.ds(), &predicted, data.noise_sd()))
}
