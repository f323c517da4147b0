//! Synthetic datasets: the smooth bump example, step functions with an
//! observation gap, and beam deflections from a known pressure profile.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::beam::{solve_beam, BeamSpec};
use crate::error::{Error, Result};
use crate::likelihood::Dataset;

/// `sin(2x) + 2 exp(-16 x^2)`.
pub fn example1_curve(x: f64) -> f64 {
    (2.0 * x).sin() + 2.0 * (-16.0 * x * x).exp()
}

/// `k` equally spaced points on `[-2, 2]` with Gaussian noise of sd 0.3.
pub fn generate_example1(k: usize, seed: u64) -> Result<Dataset> {
    let xs = equally_spaced(-2.0, 2.0, k, None)?;
    noisy(xs, example1_curve, 0.3, seed)
}

/// Piecewise-constant profile: `levels[i]` on the `i`-th interval cut by `breakpoints`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub domain: (f64, f64),
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
    /// Open interval left without observations.
    #[serde(default)]
    pub gap: Option<(f64, f64)>,
}

impl StepProfile {
    /// Two plateaus at +100 and -100 on `[0, 10]` switching at 5, with no
    /// observations in `(4, 6)`.
    pub fn example2() -> Self {
        Self {
            domain: (0.0, 10.0),
            breakpoints: vec![5.0],
            levels: vec![100.0, -100.0],
            gap: Some((4.0, 6.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(lo < hi) {
            return Err(Error::Config(format!("empty domain [{lo}, {hi}]")));
        }
        if self.levels.len() != self.breakpoints.len() + 1 {
            return Err(Error::Config(format!(
                "{} breakpoints need {} levels, got {}",
                self.breakpoints.len(),
                self.breakpoints.len() + 1,
                self.levels.len()
            )));
        }
        if self.breakpoints.iter().any(|&b| !(b > lo && b < hi)) {
            return Err(Error::Config("breakpoints must lie strictly inside the domain".into()));
        }
        if self.breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("breakpoints must be increasing".into()));
        }
        if let Some((a, b)) = self.gap {
            if !(lo <= a && a < b && b <= hi) || (a == lo && b == hi) {
                return Err(Error::Config(format!("gap ({a}, {b}) must be a proper sub-interval of the domain")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.levels[self.breakpoints.partition_point(|&b| b <= x)]
    }
}

pub fn generate_step_data(profile: &StepProfile, k: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    profile.validate()?;
    let xs = equally_spaced(profile.domain.0, profile.domain.1, k, profile.gap)?;
    noisy(xs, |x| profile.eval(x), noise_sd, seed)
}

/// Deflections at `k` equally spaced sensors of a beam loaded by a
/// piecewise-linear pressure through the points `pressure`.
pub fn generate_beam_twin(
    beam: &BeamSpec,
    pressure: &[(f64, f64)],
    k: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    beam.validate()?;
    if pressure.len() < 2 || pressure.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Config("pressure needs at least two points with increasing x".into()));
    }
    let span = 1e-9 * beam.length;
    if pressure[0].0 > span || pressure[pressure.len() - 1].0 < beam.length - span {
        return Err(Error::Config(format!("pressure points must cover the beam [0, {}]", beam.length)));
    }
    let p = |x: f64| {
        let i = pressure.partition_point(|q| q.0 <= x).clamp(1, pressure.len() - 1);
        let ((x0, y0), (x1, y1)) = (pressure[i - 1], pressure[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    let sol = solve_beam(beam, p)?;
    let xs = equally_spaced(0.0, beam.length, k, None)?;
    noisy(xs, |x| sol.deflection_at(beam, x), noise_sd, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Example1,
    Example2,
    StepFunction(StepProfile),
    BeamTwin {
        beam: BeamSpec,
        pressure: Vec<(f64, f64)>,
    },
}

/// A dataset recipe; `k` and `noise_sd` fall back to per-kind defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub noise_sd: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, seed: u64) -> Self {
        Self {
            kind,
            k: None,
            noise_sd: None,
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(match self.kind {
            GeneratorKind::Example1 => 200,
            GeneratorKind::Example2 | GeneratorKind::StepFunction(_) => 100,
            GeneratorKind::BeamTwin { .. } => 50,
        })
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd.unwrap_or(match self.kind {
            GeneratorKind::Example1 => 0.3,
            GeneratorKind::Example2 | GeneratorKind::StepFunction(_) => 5.0,
            GeneratorKind::BeamTwin { .. } => 1e-3,
        })
    }

    pub fn generate(&self) -> Result<Dataset> {
        let (k, sd) = (self.k(), self.noise_sd());
        match &self.kind {
            GeneratorKind::Example1 => {
                let xs = equally_spaced(-2.0, 2.0, k, None)?;
                noisy(xs, example1_curve, sd, self.seed)
            }
            GeneratorKind::Example2 => generate_step_data(&StepProfile::example2(), k, sd, self.seed),
            GeneratorKind::StepFunction(p) => generate_step_data(p, k, sd, self.seed),
            GeneratorKind::BeamTwin { beam, pressure } => generate_beam_twin(beam, pressure, k, sd, self.seed),
        }
    }
}

/// `k` equally spaced points over `[lo, hi]` minus the open `gap`.
fn equally_spaced(lo: f64, hi: f64, k: usize, gap: Option<(f64, f64)>) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Config("at least one observation is required".into()));
    }
    let (g0, width) = gap.map_or((hi, 0.0), |(a, b)| (a, b - a));
    let observed = hi - lo - width;
    Ok((0..k)
        .map(|i| {
            let s = if k == 1 { 0.5 * observed } else { observed * i as f64 / (k - 1) as f64 };
            if lo + s <= g0 {
                lo + s
            } else {
                (lo + s + width).min(hi)
            }
        })
        .collect())
}

/// Draws `f(x) + N(0, sd^2)`; `sd = 0` gives exact values.
fn noisy(xs: Vec<f64>, f: impl Fn(f64) -> f64, sd: f64, seed: u64) -> Result<Dataset> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::Config(format!("noise sd must be non-negative, got {sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let ds = xs.iter().map(|&x| f(x) + sd * normal.sample(&mut rng)).collect();
    // A noiseless dataset still needs a positive likelihood scale.
    Dataset::new(xs, ds, if sd > 0.0 { sd } else { 1.0 })
}
