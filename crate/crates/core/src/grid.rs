//! The fixed set of candidate sites that knot locations are restricted to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced candidate sites `z_0..z_{N-1}` covering `[x_lo, x_hi]`.
///
/// Coordinates are stored explicitly so that interpolation on the grid is
/// bit-identical between runs and platforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    coords: Vec<f64>,
    spacing: f64,
}

impl CandidateGrid {
    pub fn new(x_lo: f64, x_hi: f64, n_points: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite()) {
            return Err(Error::Grid(format!(
                "domain bounds must be finite, got [{x_lo}, {x_hi}]"
            )));
        }
        if x_lo >= x_hi {
            return Err(Error::Grid(format!(
                "degenerate domain: x_lo = {x_lo} must be strictly below x_hi = {x_hi}"
            )));
        }
        if n_points < 2 {
            return Err(Error::Grid(format!(
                "at least 2 candidate points are required, got {n_points}"
            )));
        }
        let spacing = (x_hi - x_lo) / (n_points - 1) as f64;
        let mut coords: Vec<f64> = (0..n_points)
            .map(|j| x_lo + j as f64 * spacing)
            .collect();
        coords[n_points - 1] = x_hi;
        Ok(Self { coords, spacing })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn coord(&self, index: usize) -> f64 {
        self.coords[index]
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn x_lo(&self) -> f64 {
        self.coords[0]
    }

    #[inline]
    pub fn x_hi(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    #[inline]
    pub fn last_index(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo() && x <= self.x_hi()
    }

    /// Index of the grid point nearest to `x` (clamped to the domain).
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x - self.x_lo()) / self.spacing).round();
        (raw.max(0.0) as usize).min(self.last_index())
    }
}

/// Builds a uniform candidate grid over `[x_lo, x_hi]`.
pub fn build_grid(x_lo: f64, x_hi: f64, n_points: usize) -> Result<CandidateGrid> {
    CandidateGrid::new(x_lo, x_hi, n_points)
}
