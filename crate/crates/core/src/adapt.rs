//! Adaptive proposal state: running mean and covariance of the interpolated
//! curve on every candidate point, plus a dynamic scale coerced toward a
//! target Move acceptance rate.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rjmcmc::ProposalTuning;

/// Optimal random-walk scaling `2.4^2 / d` for a `d`-dimensional proposal.
pub fn dimensional_scale(d: usize) -> f64 {
    2.4 * 2.4 / d as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptSettings {
    /// Regularizer added to the diagonal of every extracted covariance.
    pub epsilon: f64,
    pub target_accept: f64,
    /// Step sizes decay as `i^-gamma_exponent`.
    pub gamma_exponent: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl AdaptSettings {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            target_accept: 0.234,
            gamma_exponent: 0.5,
            scale_min: 1e-10,
            scale_max: 1e10,
        }
    }

    /// Default regularizer: `1e-8 * (a_max - a_min)^2`.
    pub fn default_epsilon(value_range: f64) -> f64 {
        1e-8 * value_range * value_range
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(self.gamma_exponent > 0.0 && self.gamma_exponent <= 1.0) {
            return Err(Error::Config(format!(
                "gamma exponent must lie in (0, 1], got {}",
                self.gamma_exponent
            )));
        }
        if !(self.scale_min > 0.0 && self.scale_min < self.scale_max) {
            return Err(Error::Config("scale bounds must satisfy 0 < min < max".into()));
        }
        Ok(())
    }
}

/// Result of one dynamic-scale update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleUpdate {
    pub gamma: f64,
    pub delta: f64,
    pub log_scale_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    n: usize,
    /// Upper triangle packed by rows: row `i` holds columns `i..n`.
    cov: Vec<f64>,
    mean: Vec<f64>,
    t: u64,
    log_sc: f64,
    move_counter: u64,
    settings: AdaptSettings,
}

impl AdaptiveState {
    /// Batch mean and unbiased covariance of the initial history.
    pub fn init_history(samples: &[Vec<f64>], settings: AdaptSettings) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config(format!(
                "initial history needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let n = samples[0].len();
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.len(),
            });
        }
        let count = samples.len() as f64;
        let mut mean = vec![0.0; n];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);

        let mut cov = vec![0.0; n * (n + 1) / 2];
        let mut dev = vec![0.0; n];
        for s in samples {
            for ((d, v), m) in dev.iter_mut().zip(s).zip(&mean) {
                *d = v - m;
            }
            let mut off = 0;
            for i in 0..n {
                let di = dev[i];
                let row = &mut cov[off..off + n - i];
                for (c, dj) in row.iter_mut().zip(&dev[i..]) {
                    *c += di * dj;
                }
                off += n - i;
            }
        }
        cov.iter_mut().for_each(|c| *c /= count - 1.0);

        Ok(Self {
            n,
            cov,
            mean,
            t: samples.len() as u64,
            log_sc: 0.0,
            move_counter: 0,
            settings,
        })
    }

    /// Ingests one curve vector. Returns the largest absolute change of any
    /// covariance entry.
    pub fn update_history(&mut self, curve: &[f64]) -> Result<f64> {
        if curve.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: curve.len(),
            });
        }
        let t_next = self.t + 1;
        let inv = 1.0 / t_next as f64;
        let n = self.n;
        let dev: Vec<f64> = curve.iter().zip(&self.mean).map(|(f, m)| f - m).collect();
        // Four independent running maxima keep the inner loop vectorizable.
        let mut lanes = [0.0f64; 4];
        let mut off = 0;
        for i in 0..n {
            let di = dev[i];
            let row = &mut self.cov[off..off + n - i];
            let dv = &dev[i..];
            let mut rc = row.chunks_exact_mut(4);
            let mut dc = dv.chunks_exact(4);
            for (c4, d4) in (&mut rc).zip(&mut dc) {
                for k in 0..4 {
                    let step = (di * d4[k] - c4[k]) * inv;
                    c4[k] += step;
                    let a = step.abs();
                    lanes[k] = if a > lanes[k] { a } else { lanes[k] };
                }
            }
            for (c, dj) in rc.into_remainder().iter_mut().zip(dc.remainder()) {
                let step = (di * dj - *c) * inv;
                *c += step;
                lanes[0] = lanes[0].max(step.abs());
            }
            off += n - i;
        }
        let max_change = lanes.iter().fold(0.0f64, |m, &v| m.max(v));
        for (m, d) in self.mean.iter_mut().zip(&dev) {
            *m += d * inv;
        }
        self.t = t_next;
        Ok(max_change)
    }

    /// Proposal covariance for a Move over the knots at grid `indices`:
    /// `s_c * s_d * (C[c, c] + eps * I)`.
    pub fn move_covariance(&self, indices: &[usize]) -> DMatrix<f64> {
        let d = indices.len();
        let factor = self.log_sc.exp() * dimensional_scale(d);
        let eps = self.settings.epsilon;
        DMatrix::from_fn(d, d, |a, b| {
            let c = self.cov_at(indices[a], indices[b]);
            factor * if a == b { c + eps } else { c }
        })
    }

    /// Birth proposal variance at grid `site`: `s_d * (C[j, j] + eps)` with `d = 1`.
    pub fn birth_variance(&self, site: usize) -> f64 {
        dimensional_scale(1) * (self.cov_at(site, site) + self.settings.epsilon)
    }

    /// Robbins–Monro step of the log dynamic scale toward the target rate.
    pub fn update_scale(&mut self, alpha: f64) -> ScaleUpdate {
        self.move_counter += 1;
        let gamma = (self.move_counter as f64).powf(-self.settings.gamma_exponent);
        let delta = alpha - self.settings.target_accept;
        let lo = self.settings.scale_min.ln();
        let hi = self.settings.scale_max.ln();
        let before = self.log_sc;
        self.log_sc = (self.log_sc + gamma * delta).clamp(lo, hi);
        ScaleUpdate {
            gamma,
            delta,
            log_scale_change: self.log_sc - before,
        }
    }

    #[inline]
    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // Row `i` starts after `sum_{r < i} (n - r)` entries.
        self.cov[i * self.n - i * i.saturating_sub(1) / 2 + (j - i)]
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.cov_at(i, j))
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.cov_at(i, i)).collect()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn log_scale(&self) -> f64 {
        self.log_sc
    }

    pub fn scale(&self) -> f64 {
        self.log_sc.exp()
    }

    pub fn move_counter(&self) -> u64 {
        self.move_counter
    }

    pub fn settings(&self) -> &AdaptSettings {
        &self.settings
    }

    /// Binary snapshot: little-endian `u64` header (`N_g`, `t`, move count)
    /// followed by `f64` values: log scale, mean (`N_g`), covariance (`N_g^2`, row-major).
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.move_counter.to_le_bytes())?;
        w.write_all(&self.log_sc.to_le_bytes())?;
        for v in &self.mean {
            w.write_all(&v.to_le_bytes())?;
        }
        for i in 0..self.n {
            for j in 0..self.n {
                w.write_all(&self.cov_at(i, j).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R, settings: AdaptSettings) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = next_u64(&mut r)? as usize;
        let t = next_u64(&mut r)?;
        let move_counter = next_u64(&mut r)?;
        let mut reals = vec![0.0; 1 + n + n * n];
        for v in reals.iter_mut() {
            r.read_exact(&mut word)?;
            *v = f64::from_le_bytes(word);
        }
        let full = &reals[n + 1..];
        let cov = (0..n).flat_map(|i| (i..n).map(move |j| full[i * n + j])).collect();
        Ok(Self {
            n,
            log_sc: reals[0],
            mean: reals[1..=n].to_vec(),
            cov,
            t,
            move_counter,
            settings,
        })
    }
}

impl ProposalTuning for AdaptiveState {
    fn birth_variance(&self, site: usize) -> f64 {
        AdaptiveState::birth_variance(self, site)
    }

    fn move_covariance(&self, indices: &[usize]) -> DMatrix<f64> {
        AdaptiveState::move_covariance(self, indices)
    }
}
