//! Reference computations for tests: brute-force knot-count posteriors on
//! tiny grids and closed-form acceptance probabilities.
//!
//! Everything here is deliberately independent of the sampler's curve and
//! prior code.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::BasisKind;
use crate::prior::CountPrior;
use crate::problem::Problem;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite rule on `[lo, hi]`: `panels` equal panels of `per_panel` Gauss–Legendre points.
pub fn composite_rule(lo: f64, hi: f64, panels: usize, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(per_panel);
    let h = (hi - lo) / panels as f64;
    let mut xs = Vec::with_capacity(panels * per_panel);
    let mut ws = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

fn reference_curve(basis: BasisKind, knots_x: &[f64], values: &[f64], x: f64) -> Result<f64> {
    let last = knots_x.len() - 1;
    let seg = (0..last).rev().find(|&k| knots_x[k] <= x).unwrap_or(0);
    match basis {
        BasisKind::Constant => Ok(if x >= knots_x[last] { values[last] } else { values[seg] }),
        BasisKind::Linear => {
            let t = (x - knots_x[seg]) / (knots_x[seg + 1] - knots_x[seg]);
            Ok(values[seg] * (1.0 - t) + values[seg + 1] * t)
        }
        BasisKind::CubicSpline => Err(Error::Config("the reference posterior supports constant and linear bases".into())),
    }
}

/// Interior subsets of `1..last` with `size` elements, in lexicographic order.
fn interior_subsets(last: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, last: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for s in start..last {
            cur.push(s);
            rec(s + 1, last, size, cur, out);
            cur.pop();
        }
    }
    rec(1, last, size, &mut cur, &mut out);
    out
}

fn check_tiny(problem: &Problem) -> Result<(usize, usize)> {
    let (n_min, n_max) = match problem.prior().count {
        CountPrior::Uniform { n_min, n_max } => (n_min, n_max),
        CountPrior::Poisson { .. } => return Err(Error::Config("reference posterior needs a uniform count prior".into())),
    };
    if problem.grid().len() > 8 {
        return Err(Error::Config("reference posterior is limited to grids of at most 8 points".into()));
    }
    Ok((n_min, n_max))
}

/// `p(n | D)` by enumerating every knot subset and integrating the knot
/// values over the prior box with a tensor-product quadrature rule
/// (`panels * per_panel` nodes per dimension).
pub fn posterior_n_quadrature(problem: &Problem, panels: usize, per_panel: usize) -> Result<BTreeMap<usize, f64>> {
    let (n_min, n_max) = check_tiny(problem)?;
    let grid = problem.grid();
    let prior = problem.prior();
    let (nodes, weights) = composite_rule(prior.a_min, prior.a_max, panels, per_panel);
    let q = nodes.len();
    let data = problem.data();
    let sd = data.noise_sd();
    let log_norm = -0.5 * data.len() as f64 * (2.0 * PI * sd * sd).ln();
    let last = grid.last_index();

    let mut mass = BTreeMap::new();
    for n in n_min..=n_max {
        let subsets = interior_subsets(last, n - 2);
        let mut total = 0.0;
        for interior in &subsets {
            let mut sites = vec![0];
            sites.extend(interior);
            sites.push(last);
            let knots_x: Vec<f64> = sites.iter().map(|&s| grid.coord(s)).collect();
            let mut idx = vec![0usize; n];
            let mut values = vec![0.0; n];
            let mut integral = 0.0;
            'outer: loop {
                let mut w = 1.0;
                for k in 0..n {
                    values[k] = nodes[idx[k]];
                    w *= weights[idx[k]];
                }
                let mut sq = 0.0;
                for (&x, &d) in data.xs().iter().zip(data.ds()) {
                    let r = d - reference_curve(problem.basis(), &knots_x, &values, x)?;
                    sq += r * r;
                }
                integral += w * (log_norm - sq / (2.0 * sd * sd)).exp();
                for k in 0..n {
                    idx[k] += 1;
                    if idx[k] < q {
                        continue 'outer;
                    }
                    idx[k] = 0;
                }
                break;
            }
            total += integral;
        }
        // Uniform p(n) cancels; p(r | n) = 1 / #subsets; p(a | n) = range^-n.
        let weight = total / subsets.len() as f64 / prior.value_range().powi(n as i32);
        mass.insert(n, weight);
    }
    normalize(mass)
}

/// Same posterior for the constant basis using the exact per-segment
/// Gaussian integrals.
pub fn posterior_n_constant_exact(problem: &Problem) -> Result<BTreeMap<usize, f64>> {
    let (n_min, n_max) = check_tiny(problem)?;
    if problem.basis() != BasisKind::Constant {
        return Err(Error::Config("exact reference needs the constant basis".into()));
    }
    let grid = problem.grid();
    let prior = problem.prior();
    let data = problem.data();
    let sd = data.noise_sd();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let last = grid.last_index();
    let segment_integral = |ds: &[f64]| -> f64 {
        let m = ds.len() as f64;
        if ds.is_empty() {
            return prior.value_range();
        }
        let mean = ds.iter().sum::<f64>() / m;
        let ss: f64 = ds.iter().map(|d| (d - mean) * (d - mean)).sum();
        let s = sd / m.sqrt();
        let mass = unit.cdf((prior.a_max - mean) / s) - unit.cdf((prior.a_min - mean) / s);
        (2.0 * PI * sd * sd).powf(-m / 2.0) * (-ss / (2.0 * sd * sd)).exp() * (2.0 * PI * s * s).sqrt() * mass
    };
    let mut mass = BTreeMap::new();
    for n in n_min..=n_max {
        let subsets = interior_subsets(last, n - 2);
        let mut total = 0.0;
        for interior in &subsets {
            let mut sites = vec![0];
            sites.extend(interior);
            sites.push(last);
            let knots_x: Vec<f64> = sites.iter().map(|&s| grid.coord(s)).collect();
            let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n];
            for (&x, &d) in data.xs().iter().zip(data.ds()) {
                let k = if x >= knots_x[n - 1] {
                    n - 1
                } else {
                    (0..n - 1).rev().find(|&k| knots_x[k] <= x).unwrap_or(0)
                };
                groups[k].push(d);
            }
            total += groups.iter().map(|g| segment_integral(g)).product::<f64>();
        }
        mass.insert(n, total / subsets.len() as f64 / prior.value_range().powi(n as i32));
    }
    normalize(mass)
}

fn normalize(mass: BTreeMap<usize, f64>) -> Result<BTreeMap<usize, f64>> {
    let z: f64 = mass.values().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Diagnostics("reference posterior has no mass".into()));
    }
    Ok(mass.into_iter().map(|(n, m)| (n, m / z)).collect())
}

/// Birth under a uniform count prior: `min(0, dLL - ln(a_max - a_min) - ln q(a_b | a_p))`.
pub fn birth_log_alpha(delta_ll: f64, value_range: f64, log_q_birth: f64) -> f64 {
    (delta_ll - value_range.ln() - log_q_birth).min(0.0)
}

/// Death under a uniform count prior: `min(0, dLL + ln(a_max - a_min) + ln q(a_d | a_p))`.
pub fn death_log_alpha(delta_ll: f64, value_range: f64, log_q_death: f64) -> f64 {
    (delta_ll + value_range.ln() + log_q_death).min(0.0)
}

/// Move: `min(0, dLL)`.
pub fn move_log_alpha(delta_ll: f64) -> f64 {
    delta_ll.min(0.0)
}
