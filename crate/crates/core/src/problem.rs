//! A fully specified inference problem: grid, basis, prior, data and forward model.

use std::sync::Arc;

use crate::error::Result;
use crate::grid::CandidateGrid;
use crate::likelihood::{log_likelihood, Dataset, ForwardModel, IdentityForward};
use crate::model::{curve_on_grid, BasisKind, Curve, KnotModel};
use crate::prior::{location_table, log_prior_with, CountPrior, PriorSpec};

#[derive(Debug, Clone)]
pub struct Problem {
    grid: CandidateGrid,
    basis: BasisKind,
    prior: PriorSpec,
    data: Dataset,
    forward: Arc<dyn ForwardModel>,
    /// `log p(r | n)` by knot count.
    location: Arc<[f64]>,
}

impl Problem {
    pub fn new(
        grid: CandidateGrid,
        basis: BasisKind,
        prior: PriorSpec,
        data: Dataset,
        forward: Arc<dyn ForwardModel>,
    ) -> Result<Self> {
        prior.validate(&grid)?;
        data.check_domain(&grid)?;
        Ok(Self {
            location: location_table(grid.len()).into(),
            grid,
            basis,
            prior,
            data,
            forward,
        })
    }

    /// Regression problem with the identity forward model.
    pub fn regression(grid: CandidateGrid, basis: BasisKind, prior: PriorSpec, data: Dataset) -> Result<Self> {
        Self::new(grid, basis, prior, data, Arc::new(IdentityForward))
    }

    pub fn grid(&self) -> &CandidateGrid {
        &self.grid
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn forward(&self) -> &dyn ForwardModel {
        self.forward.as_ref()
    }

    pub fn curve(&self, model: &KnotModel) -> Curve {
        Curve::new(model, &self.grid, self.basis)
    }

    pub fn log_prior(&self, model: &KnotModel) -> f64 {
        log_prior_with(model, &self.prior, self.grid.len(), |n| self.location[n])
    }

    pub fn log_likelihood(&self, model: &KnotModel) -> Result<f64> {
        log_likelihood(model, &self.data, self.forward.as_ref(), &self.grid, self.basis)
    }

    pub fn curve_on_grid(&self, model: &KnotModel) -> Result<Vec<f64>> {
        curve_on_grid(model, &self.grid, self.basis)
    }

    /// Default starting state: knots at both ends plus the two sites after
    /// the left end, all values zero (clamped into the prior range).
    pub fn initial_model(&self) -> Result<KnotModel> {
        let last = self.grid.last_index();
        let mut indices: Vec<usize> = [0, 1, 2].into_iter().filter(|&i| i < last).collect();
        indices.push(last);
        let n_min = match self.prior.count {
            CountPrior::Uniform { n_min, n_max } => {
                if indices.len() > n_max {
                    indices = vec![0, last];
                }
                n_min
            }
            CountPrior::Poisson { .. } => 2,
        };
        let mut next = 3;
        while indices.len() < n_min && next < last {
            indices.insert(indices.len() - 1, next);
            next += 1;
        }
        let v = 0.0f64.clamp(self.prior.a_min, self.prior.a_max);
        let values = vec![v; indices.len()];
        KnotModel::new(indices, values, &self.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn problem(n_grid: usize, prior: PriorSpec) -> Problem {
        let g = build_grid(0.0, 1.0, n_grid).unwrap();
        let data = Dataset::new(vec![0.5], vec![0.0], 1.0).unwrap();
        Problem::regression(g, BasisKind::Linear, prior, data).unwrap()
    }

    #[test]
    fn initial_model_layout() {
        let p = problem(101, PriorSpec::uniform(2, 101, -1.0, 1.0));
        let m = p.initial_model().unwrap();
        assert_eq!(m.indices(), &[0, 1, 2, 100]);
        assert_eq!(m.values(), &[0.0; 4]);
        assert!(p.log_prior(&m).is_finite());
    }

    #[test]
    fn initial_model_respects_count_support() {
        let small = problem(3, PriorSpec::uniform(2, 3, -1.0, 1.0));
        assert_eq!(small.initial_model().unwrap().indices(), &[0, 1, 2]);
        let capped = problem(11, PriorSpec::uniform(2, 3, -1.0, 1.0));
        assert_eq!(capped.initial_model().unwrap().indices(), &[0, 10]);
        let floor = problem(11, PriorSpec::uniform(6, 11, 1.0, 2.0));
        let m = floor.initial_model().unwrap();
        assert_eq!(m.n(), 6);
        assert!(floor.log_prior(&m).is_finite());
    }

    #[test]
    fn rejects_data_outside_grid() {
        let g = build_grid(0.0, 1.0, 5).unwrap();
        let data = Dataset::new(vec![1.5], vec![0.0], 1.0).unwrap();
        assert!(Problem::regression(g, BasisKind::Linear, PriorSpec::uniform(2, 5, -1.0, 1.0), data).is_err());
    }
}
