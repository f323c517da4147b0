//! Knot models and their interpolated curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CandidateGrid;

/// Interpolation family connecting consecutive knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Step function: `a_i` holds on `[r_i, r_{i+1})`; the final knot value
    /// applies at the right endpoint only.
    Constant,
    Linear,
    /// Natural cubic spline (zero second derivative at both ends).
    CubicSpline,
}

/// A trans-dimensional state: `n` knots at distinct, sorted grid indices with
/// their values. The first and last grid points are always occupied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotModel {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl KnotModel {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, grid: &CandidateGrid) -> Result<Self> {
        let model = Self { indices, values };
        model.validate(grid)?;
        Ok(model)
    }

    /// Two-knot model pinned at both endpoints.
    pub fn endpoints(grid: &CandidateGrid, left: f64, right: f64) -> Self {
        Self {
            indices: vec![0, grid.last_index()],
            values: vec![left, right],
        }
    }

    /// Checks every structural invariant against `grid`.
    pub fn validate(&self, grid: &CandidateGrid) -> Result<()> {
        let n = self.indices.len();
        if n < 2 {
            return Err(Error::Model(format!("at least 2 knots required, got {n}")));
        }
        if self.values.len() != n {
            return Err(Error::Model(format!(
                "{n} knot indices but {} knot values",
                self.values.len()
            )));
        }
        if self.indices[0] != 0 || self.indices[n - 1] != grid.last_index() {
            return Err(Error::Model(
                "both domain endpoints must carry a knot".to_string(),
            ));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Model(
                "knot indices must be distinct and sorted ascending".to_string(),
            ));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Model(format!("non-finite knot value {v}")));
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Position of `site` among the knots, if occupied.
    pub fn position_of(&self, site: usize) -> Option<usize> {
        self.indices.binary_search(&site).ok()
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        self.position_of(site).is_some()
    }

    /// Inserts a knot keeping indices sorted and returns its position.
    ///
    /// Panics if `site` is already occupied.
    pub fn insert(&mut self, site: usize, value: f64) -> usize {
        match self.indices.binary_search(&site) {
            Ok(_) => panic!("grid site {site} is already occupied"),
            Err(pos) => {
                self.indices.insert(pos, site);
                self.values.insert(pos, value);
                pos
            }
        }
    }

    /// Removes the knot at `position`, returning its `(site, value)`.
    pub fn remove(&mut self, position: usize) -> (usize, f64) {
        (self.indices.remove(position), self.values.remove(position))
    }

    /// Same knot locations with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Grid indices not carrying a knot, in ascending order.
    pub fn free_sites(&self, grid: &CandidateGrid) -> Vec<usize> {
        let mut out = Vec::with_capacity(grid.len() - self.n());
        let mut k = 0;
        for j in 0..grid.len() {
            if k < self.indices.len() && self.indices[k] == j {
                k += 1;
            } else {
                out.push(j);
            }
        }
        out
    }
}

/// A curve evaluator built from a knot model.
///
/// Evaluation at a knot coordinate returns the stored knot value exactly for
/// every basis.
#[derive(Debug, Clone)]
pub struct Curve {
    basis: BasisKind,
    xs: Vec<f64>,
    ys: Vec<f64>,
    second_derivs: Vec<f64>,
    x_lo: f64,
    x_hi: f64,
}

impl Curve {
    pub fn new(model: &KnotModel, grid: &CandidateGrid, basis: BasisKind) -> Self {
        let xs: Vec<f64> = model.indices().iter().map(|&i| grid.coord(i)).collect();
        let ys = model.values().to_vec();
        let second_derivs = match basis {
            BasisKind::CubicSpline => natural_spline_second_derivatives(&xs, &ys),
            _ => Vec::new(),
        };
        Self {
            basis,
            xs,
            ys,
            second_derivs,
            x_lo: grid.x_lo(),
            x_hi: grid.x_hi(),
        }
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    /// Evaluates at `x`, rejecting points outside the domain.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= self.x_lo && x <= self.x_hi) {
            return Err(Error::OutOfDomain {
                x,
                lo: self.x_lo,
                hi: self.x_hi,
            });
        }
        Ok(self.eval_in_segment(x, self.segment(x)))
    }

    /// Evaluates many points, reusing the previous segment when queries are
    /// ordered. Callers guarantee the points lie in the domain.
    pub fn eval_into(&self, xs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(xs.len());
        let mut seg = 0usize;
        for &x in xs {
            if !self.in_segment(x, seg) {
                seg = self.segment(x);
            }
            out.push(self.eval_in_segment(x, seg));
        }
    }

    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if let Some(&x) = xs.iter().find(|&&x| !(x >= self.x_lo && x <= self.x_hi)) {
            return Err(Error::OutOfDomain {
                x,
                lo: self.x_lo,
                hi: self.x_hi,
            });
        }
        let mut out = Vec::new();
        self.eval_into(xs, &mut out);
        Ok(out)
    }

    /// Index `i` of the last knot with `xs[i] <= x`.
    #[inline]
    fn segment(&self, x: f64) -> usize {
        self.xs.partition_point(|&k| k <= x).saturating_sub(1)
    }

    #[inline]
    fn in_segment(&self, x: f64, seg: usize) -> bool {
        let last = self.xs.len() - 1;
        if seg == last {
            x == self.xs[last]
        } else {
            self.xs[seg] <= x && x < self.xs[seg + 1]
        }
    }

    #[inline]
    fn eval_in_segment(&self, x: f64, seg: usize) -> f64 {
        let last = self.xs.len() - 1;
        match self.basis {
            BasisKind::Constant => self.ys[seg],
            BasisKind::Linear => {
                let i = seg.min(last - 1);
                let (x0, x1) = (self.xs[i], self.xs[i + 1]);
                let t = (x - x0) / (x1 - x0);
                (1.0 - t) * self.ys[i] + t * self.ys[i + 1]
            }
            BasisKind::CubicSpline => {
                let i = seg.min(last - 1);
                let (x0, x1) = (self.xs[i], self.xs[i + 1]);
                let h = x1 - x0;
                let a = (x1 - x) / h;
                let b = (x - x0) / h;
                let y2 = &self.second_derivs;
                a * self.ys[i]
                    + b * self.ys[i + 1]
                    + ((a * a * a - a) * y2[i] + (b * b * b - b) * y2[i + 1]) * (h * h) / 6.0
            }
        }
    }
}

/// Second derivatives of the natural cubic spline through `(xs, ys)`.
fn natural_spline_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut y2 = vec![0.0; n];
    if n < 3 {
        return y2;
    }
    // Tridiagonal sweep with natural end conditions.
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
        let p = sig * y2[i - 1] + 2.0;
        y2[i] = (sig - 1.0) / p;
        let slope_diff =
            (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
        u[i] = (6.0 * slope_diff / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
    }
    y2[n - 1] = 0.0;
    for k in (0..n - 1).rev() {
        y2[k] = y2[k] * y2[k + 1] + u[k];
    }
    y2[0] = 0.0;
    y2
}

/// Evaluates the curve of `model` at each query point.
pub fn interpolate(
    model: &KnotModel,
    grid: &CandidateGrid,
    basis: BasisKind,
    query: &[f64],
) -> Result<Vec<f64>> {
    model.validate(grid)?;
    Curve::new(model, grid, basis).eval_many(query)
}

/// Curve values at every candidate point.
pub fn curve_on_grid(model: &KnotModel, grid: &CandidateGrid, basis: BasisKind) -> Result<Vec<f64>> {
    interpolate(model, grid, basis, grid.coords())
}

/// Unchecked variant of [`curve_on_grid`] for the sampler hot path; writes into `out`.
pub(crate) fn fill_curve_on_grid(
    model: &KnotModel,
    grid: &CandidateGrid,
    basis: BasisKind,
    out: &mut Vec<f64>,
) {
    Curve::new(model, grid, basis).eval_into(grid.coords(), out);
}
