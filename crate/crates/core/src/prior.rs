//! Priors over knot count, knot locations and knot values.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::grid::CandidateGrid;
use crate::model::KnotModel;

/// Prior on the number of knots `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountPrior {
    /// Uniform on `n_min..=n_max`.
    Uniform { n_min: usize, n_max: usize },
    /// Poisson mass truncated to `2..=N_g`, left unnormalized.
    Poisson { lambda: f64 },
}

/// Joint prior `p(n) p(r | n) p(a | n, r)`.
///
/// Locations are uniform over interior subsets of the grid; values are
/// independent and uniform on `[a_min, a_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub count: CountPrior,
    pub a_min: f64,
    pub a_max: f64,
}

impl PriorSpec {
    pub fn uniform(n_min: usize, n_max: usize, a_min: f64, a_max: f64) -> Self {
        Self {
            count: CountPrior::Uniform { n_min, n_max },
            a_min,
            a_max,
        }
    }

    pub fn poisson(lambda: f64, a_min: f64, a_max: f64) -> Self {
        Self {
            count: CountPrior::Poisson { lambda },
            a_min,
            a_max,
        }
    }

    pub fn validate(&self, grid: &CandidateGrid) -> Result<()> {
        if !(self.a_min < self.a_max) || !self.a_min.is_finite() || !self.a_max.is_finite() {
            return Err(Error::Prior(format!(
                "value bounds must satisfy a_min < a_max, got [{}, {}]",
                self.a_min, self.a_max
            )));
        }
        match self.count {
            CountPrior::Uniform { n_min, n_max } => {
                if n_min < 2 || n_max > grid.len() || n_min > n_max {
                    return Err(Error::Prior(format!(
                        "uniform count support [{n_min}, {n_max}] must lie within [2, {}]",
                        grid.len()
                    )));
                }
            }
            CountPrior::Poisson { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::Prior(format!("Poisson rate must be positive, got {lambda}")));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value_range(&self) -> f64 {
        self.a_max - self.a_min
    }

    #[inline]
    pub fn contains_value(&self, a: f64) -> bool {
        a >= self.a_min && a <= self.a_max
    }

    /// `log p(n)`, `-inf` outside the support.
    pub fn log_count_mass(&self, n: usize, n_grid: usize) -> f64 {
        match self.count {
            CountPrior::Uniform { n_min, n_max } => {
                if n < n_min || n > n_max {
                    f64::NEG_INFINITY
                } else {
                    -(((n_max - n_min + 1) as f64).ln())
                }
            }
            CountPrior::Poisson { lambda } => {
                if n < 2 || n > n_grid {
                    f64::NEG_INFINITY
                } else {
                    n as f64 * lambda.ln() - lambda - ln_factorial(n as u64)
                }
            }
        }
    }
}

/// `log C(m, k)` as a sum of `min(k, m - k)` log ratios, accurate to a few ulps
/// of the result where the gamma-function route loses about 1e-12.
pub fn log_binomial(m: usize, k: usize) -> f64 {
    if k > m {
        return f64::NEG_INFINITY;
    }
    let k = k.min(m - k);
    (1..=k).map(|i| ((m - k + i) as f64 / i as f64).ln()).sum()
}

/// `log p(r | n) = -log C(N_g - 2, n - 2)`.
pub fn log_location_mass(n: usize, n_grid: usize) -> f64 {
    if n < 2 || n > n_grid {
        return f64::NEG_INFINITY;
    }
    -log_binomial(n_grid - 2, n - 2)
}

/// Log prior density of `model` with `log p(r | n)` supplied by `location`.
pub(crate) fn log_prior_with(
    model: &KnotModel,
    spec: &PriorSpec,
    n_grid: usize,
    location: impl FnOnce(usize) -> f64,
) -> f64 {
    let n = model.n();
    let count = spec.log_count_mass(n, n_grid);
    if count == f64::NEG_INFINITY || n > n_grid {
        return f64::NEG_INFINITY;
    }
    if !model.values().iter().all(|&a| spec.contains_value(a)) {
        return f64::NEG_INFINITY;
    }
    count + location(n) - n as f64 * spec.value_range().ln()
}

/// `log_location_mass(n, n_grid)` for `n = 0..=n_grid`.
pub(crate) fn location_table(n_grid: usize) -> Vec<f64> {
    (0..=n_grid).map(|n| log_location_mass(n, n_grid)).collect()
}

/// Log prior density of `model`; `-inf` when out of support.
pub fn log_prior(model: &KnotModel, spec: &PriorSpec, grid: &CandidateGrid) -> f64 {
    log_prior_with(model, spec, grid.len(), |n| log_location_mass(n, grid.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn example_one_two_knots() {
        let g = build_grid(-2.0, 2.0, 101).unwrap();
        let spec = PriorSpec::uniform(2, 101, -10.0, 10.0);
        let m = KnotModel::endpoints(&g, 0.5, -0.5);
        let expected = -(100.0f64.ln()) - 2.0 * 20.0f64.ln();
        assert!((log_prior(&m, &spec, &g) - expected).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_value_is_impossible() {
        let g = build_grid(-2.0, 2.0, 101).unwrap();
        let spec = PriorSpec::uniform(2, 101, -10.0, 10.0);
        let m = KnotModel::endpoints(&g, 11.0, 0.0);
        assert_eq!(log_prior(&m, &spec, &g), f64::NEG_INFINITY);
    }

    #[test]
    fn count_outside_uniform_support() {
        let g = build_grid(0.0, 1.0, 11).unwrap();
        let spec = PriorSpec::uniform(3, 5, -1.0, 1.0);
        let m = KnotModel::endpoints(&g, 0.0, 0.0);
        assert_eq!(log_prior(&m, &spec, &g), f64::NEG_INFINITY);
    }

    #[test]
    fn poisson_count_ratio() {
        let spec = PriorSpec::poisson(22.0, -300.0, 300.0);
        let d = spec.log_count_mass(23, 101) - spec.log_count_mass(22, 101);
        assert!((d - (22.0f64 / 23.0).ln()).abs() < 1e-12);
        assert_eq!(spec.log_count_mass(1, 101), f64::NEG_INFINITY);
        assert_eq!(spec.log_count_mass(102, 101), f64::NEG_INFINITY);
    }

    #[test]
    fn location_mass_matches_binomial() {
        // C(99, 2) = 4851
        assert!((log_location_mass(4, 101) + 4851.0f64.ln()).abs() < 1e-12);
        assert_eq!(log_location_mass(2, 101), 0.0);
        assert_eq!(log_binomial(5, 0), 0.0);
        assert!((log_binomial(10, 3) - 120.0f64.ln()).abs() < 1e-15);
        assert_eq!(log_binomial(3, 4), f64::NEG_INFINITY);
        let gamma_route = statrs::function::factorial::ln_binomial(99, 49);
        assert!((log_binomial(99, 49) - gamma_route).abs() < 1e-10);
    }

    #[test]
    fn in_bounds_perturbation_leaves_prior_unchanged() {
        let g = build_grid(0.0, 1.0, 21).unwrap();
        let spec = PriorSpec::uniform(2, 21, -5.0, 5.0);
        let m = KnotModel::new(vec![0, 4, 9, 20], vec![1.0, -2.0, 3.0, 0.0], &g).unwrap();
        let mut p = m.clone();
        p.values_mut().copy_from_slice(&[-4.9, 4.9, 0.0, 2.2]);
        assert_eq!(log_prior(&m, &spec, &g), log_prior(&p, &spec, &g));
    }

    #[test]
    fn validation() {
        let g = build_grid(0.0, 1.0, 11).unwrap();
        assert!(PriorSpec::uniform(1, 5, 0.0, 1.0).validate(&g).is_err());
        assert!(PriorSpec::uniform(2, 12, 0.0, 1.0).validate(&g).is_err());
        assert!(PriorSpec::uniform(2, 5, 1.0, 1.0).validate(&g).is_err());
        assert!(PriorSpec::poisson(0.0, 0.0, 1.0).validate(&g).is_err());
        assert!(PriorSpec::poisson(3.0, 0.0, 1.0).validate(&g).is_ok());
    }
}
