//! Euler–Bernoulli beam finite elements with cubic Hermite shape functions.
//!
//! Degrees of freedom are numbered `2i` (deflection) and `2i + 1` (rotation)
//! for node `i`; node `i` sits at `x = i * length / n_elements`.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::ForwardModel;
use crate::model::Curve;

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];
const HALF_BAND: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dof {
    Deflection,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub node: usize,
    pub dof: Dof,
    #[serde(default)]
    pub value: f64,
}

impl Constraint {
    pub fn fixed(node: usize, dof: Dof) -> Self {
        Self { node, dof, value: 0.0 }
    }

    fn global_dof(&self) -> usize {
        2 * self.node
            + match self.dof {
                Dof::Deflection => 0,
                Dof::Rotation => 1,
            }
    }
}

/// Flexural rigidity, constant or piecewise constant per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rigidity {
    Uniform(f64),
    PerElement(Vec<f64>),
}

fn clamped_base() -> Vec<Constraint> {
    vec![
        Constraint::fixed(0, Dof::Deflection),
        Constraint::fixed(0, Dof::Rotation),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub length: f64,
    pub n_elements: usize,
    pub flexural_rigidity: Rigidity,
    /// Defaults to a clamped base at node 0.
    #[serde(default = "clamped_base")]
    pub constraints: Vec<Constraint>,
}

impl BeamSpec {
    pub fn cantilever(length: f64, n_elements: usize, ei: f64) -> Self {
        Self {
            length,
            n_elements,
            flexural_rigidity: Rigidity::Uniform(ei),
            constraints: clamped_base(),
        }
    }

    pub fn simply_supported(length: f64, n_elements: usize, ei: f64) -> Self {
        Self {
            length,
            n_elements,
            flexural_rigidity: Rigidity::Uniform(ei),
            constraints: vec![
                Constraint::fixed(0, Dof::Deflection),
                Constraint::fixed(n_elements, Dof::Deflection),
            ],
        }
    }

    pub fn element_length(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elements + 1
    }

    pub fn node_coord(&self, node: usize) -> f64 {
        if node == self.n_elements {
            self.length
        } else {
            node as f64 * self.element_length()
        }
    }

    fn rigidity(&self, element: usize) -> f64 {
        match &self.flexural_rigidity {
            Rigidity::Uniform(ei) => *ei,
            Rigidity::PerElement(v) => v[element],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Beam(format!("length must be positive, got {}", self.length)));
        }
        if self.n_elements == 0 {
            return Err(Error::Beam("at least one element is required".into()));
        }
        match &self.flexural_rigidity {
            Rigidity::Uniform(ei) if !(*ei > 0.0) => {
                return Err(Error::Beam(format!("EI must be positive, got {ei}")));
            }
            Rigidity::PerElement(v) if v.len() != self.n_elements => {
                return Err(Error::Beam(format!(
                    "{} rigidity values for {} elements",
                    v.len(),
                    self.n_elements
                )));
            }
            Rigidity::PerElement(v) if v.iter().any(|ei| !(*ei > 0.0)) => {
                return Err(Error::Beam("EI must be positive in every element".into()));
            }
            _ => {}
        }
        for c in &self.constraints {
            if c.node > self.n_elements {
                return Err(Error::Beam(format!(
                    "constraint on node {} but the mesh has {} nodes",
                    c.node,
                    self.n_nodes()
                )));
            }
        }
        let mut deflection_nodes: Vec<usize> = self
            .constraints
            .iter()
            .filter(|c| c.dof == Dof::Deflection)
            .map(|c| c.node)
            .collect();
        deflection_nodes.sort_unstable();
        deflection_nodes.dedup();
        let has_rotation = self.constraints.iter().any(|c| c.dof == Dof::Rotation);
        if deflection_nodes.is_empty() {
            return Err(Error::Unconstrained("translation"));
        }
        if deflection_nodes.len() < 2 && !has_rotation {
            return Err(Error::Unconstrained("rotation"));
        }
        Ok(())
    }
}

/// Nodal deflections and rotations of a solved beam.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub nodal_deflections: Vec<f64>,
    pub nodal_rotations: Vec<f64>,
}

/// Hermite beam element stiffness for constant `ei` over length `l`.
pub fn element_stiffness(ei: f64, l: f64) -> Result<Matrix4<f64>> {
    if !(ei > 0.0) || !(l > 0.0) {
        return Err(Error::Beam(format!(
            "element stiffness needs EI > 0 and L > 0, got EI = {ei}, L = {l}"
        )));
    }
    let c = ei / (l * l * l);
    let (l2, l1) = (l * l, l);
    #[rustfmt::skip]
    let k = Matrix4::new(
        12.0,       6.0 * l1,  -12.0,      6.0 * l1,
        6.0 * l1,   4.0 * l2,  -6.0 * l1,  2.0 * l2,
        -12.0,      -6.0 * l1, 12.0,       -6.0 * l1,
        6.0 * l1,   2.0 * l2,  -6.0 * l1,  4.0 * l2,
    );
    Ok(k * c)
}

/// Hermite shape functions at local coordinate `xi` in `[0, l]`.
pub fn shape_functions(xi: f64, l: f64) -> [f64; 4] {
    let s = xi / l;
    let (s2, s3) = (s * s, s * s * s);
    [
        1.0 - 3.0 * s2 + 2.0 * s3,
        l * (s - 2.0 * s2 + s3),
        3.0 * s2 - 2.0 * s3,
        l * (s3 - s2),
    ]
}

/// Maps load moments `F_p0..F_p3` (integrals of `f * xi^k`) to consistent
/// nodal forces. Rows are the monomial coefficients of the shape functions.
pub fn moments_to_nodal_forces(moments: [f64; 4], l: f64) -> [f64; 4] {
    let (l2, l3) = (l * l, l * l * l);
    let t = [
        [1.0, 0.0, -3.0 / l2, 2.0 / l3],
        [0.0, 1.0, -2.0 / l, 1.0 / l2],
        [0.0, 0.0, 3.0 / l2, -2.0 / l3],
        [0.0, 0.0, -1.0 / l, 1.0 / l2],
    ];
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(&t) {
        *o = row.iter().zip(&moments).map(|(a, b)| a * b).sum();
    }
    out
}

/// Gauss points (local `xi`, weight) for an element of length `l`.
fn gauss_points(l: f64) -> impl Iterator<Item = (f64, f64)> {
    GAUSS_NODES
        .iter()
        .zip(GAUSS_WEIGHTS)
        .map(move |(&t, w)| (0.5 * l * (1.0 + t), 0.5 * l * w))
}

fn moments_from_samples(values: &[f64], l: f64) -> [f64; 4] {
    let mut m = [0.0; 4];
    for ((xi, w), f) in gauss_points(l).zip(values) {
        let wf = w * f;
        m[0] += wf;
        m[1] += wf * xi;
        m[2] += wf * xi * xi;
        m[3] += wf * xi * xi * xi;
    }
    m
}

/// Consistent nodal forces of a distributed load `f` over `[x_e, x_e + l]`.
pub fn equivalent_nodal_forces(f: impl Fn(f64) -> f64, x_e: f64, l: f64) -> [f64; 4] {
    let samples: Vec<f64> = gauss_points(l).map(|(xi, _)| f(x_e + xi)).collect();
    moments_to_nodal_forces(moments_from_samples(&samples, l), l)
}

/// Banded Cholesky factor of the constrained stiffness matrix, reusable for
/// any load since the stiffness does not depend on the pressure.
#[derive(Debug, Clone)]
pub struct BeamSolver {
    spec: BeamSpec,
    free: Vec<usize>,
    /// global dof -> prescribed value (NaN when free)
    prescribed: Vec<f64>,
    /// rows of the free-free stiffness restricted to the band, used for the
    /// prescribed-displacement correction
    coupling: Vec<Vec<(usize, f64)>>,
    factor: Vec<[f64; HALF_BAND + 1]>,
}

impl BeamSolver {
    pub fn new(spec: &BeamSpec) -> Result<Self> {
        spec.validate()?;
        let n_dof = 2 * spec.n_nodes();
        let l = spec.element_length();

        // Global stiffness in lower band storage: band[i][k] = K[i][i - k].
        let mut band = vec![[0.0f64; HALF_BAND + 1]; n_dof];
        for e in 0..spec.n_elements {
            let ke = element_stiffness(spec.rigidity(e), l)?;
            let base = 2 * e;
            for a in 0..4 {
                for b in 0..=a {
                    band[base + a][a - b] += ke[(a, b)];
                }
            }
        }
        let stiffness = |i: usize, j: usize| -> f64 {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            if hi - lo > HALF_BAND {
                0.0
            } else {
                band[hi][hi - lo]
            }
        };

        let mut prescribed = vec![f64::NAN; n_dof];
        for c in &spec.constraints {
            prescribed[c.global_dof()] = c.value;
        }
        let free: Vec<usize> = (0..n_dof).filter(|&d| prescribed[d].is_nan()).collect();

        let coupling: Vec<Vec<(usize, f64)>> = free
            .iter()
            .map(|&i| {
                (i.saturating_sub(HALF_BAND)..(i + HALF_BAND + 1).min(n_dof))
                    .filter(|&j| !prescribed[j].is_nan())
                    .map(|j| (j, stiffness(i, j)))
                    .collect()
            })
            .collect();

        // Reduced matrix keeps bandwidth <= HALF_BAND since removing dofs
        // only shortens index distances.
        let n = free.len();
        let mut factor = vec![[0.0f64; HALF_BAND + 1]; n];
        let scale = (0..n_dof).map(|d| band[d][0]).fold(0.0f64, f64::max);
        for i in 0..n {
            for j in i.saturating_sub(HALF_BAND)..=i {
                let mut sum = stiffness(free[i], free[j]);
                for k in i.saturating_sub(HALF_BAND)..j {
                    if i - k <= HALF_BAND && j - k <= HALF_BAND {
                        sum -= factor[i][i - k] * factor[j][j - k];
                    }
                }
                if i == j {
                    if !(sum > 1e-12 * scale) {
                        return Err(Error::Unconstrained("mode"));
                    }
                    factor[i][0] = sum.sqrt();
                } else {
                    factor[i][i - j] = sum / factor[j][0];
                }
            }
        }

        Ok(Self {
            spec: spec.clone(),
            free,
            prescribed,
            coupling,
            factor,
        })
    }

    pub fn spec(&self) -> &BeamSpec {
        &self.spec
    }

    /// Solves `K d = f` for a global nodal load vector of length `2 * n_nodes`.
    pub fn solve_nodal(&self, loads: &[f64]) -> Result<FemSolution> {
        let n_dof = self.prescribed.len();
        if loads.len() != n_dof {
            return Err(Error::Dimension {
                expected: n_dof,
                got: loads.len(),
            });
        }
        let n = self.free.len();
        let mut y: Vec<f64> = self
            .free
            .iter()
            .zip(&self.coupling)
            .map(|(&i, row)| {
                loads[i]
                    - row
                        .iter()
                        .map(|&(j, k)| k * self.prescribed[j])
                        .sum::<f64>()
            })
            .collect();
        // L y = b
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(HALF_BAND)..i {
                s -= self.factor[i][i - k] * y[k];
            }
            y[i] = s / self.factor[i][0];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + HALF_BAND + 1).min(n) {
                s -= self.factor[k][k - i] * y[k];
            }
            y[i] = s / self.factor[i][0];
        }

        let mut full = self.prescribed.clone();
        for (&d, v) in self.free.iter().zip(&y) {
            full[d] = *v;
        }
        Ok(FemSolution {
            nodal_deflections: full.iter().step_by(2).copied().collect(),
            nodal_rotations: full.iter().skip(1).step_by(2).copied().collect(),
        })
    }

    /// Assembles consistent nodal loads from pressure samples at the Gauss
    /// points of every element (5 per element, element-major order).
    pub fn assemble_loads(&self, gauss_values: &[f64]) -> Vec<f64> {
        let l = self.spec.element_length();
        let mut loads = vec![0.0; 2 * self.spec.n_nodes()];
        for (e, vals) in gauss_values.chunks_exact(GAUSS_NODES.len()).enumerate() {
            let fe = moments_to_nodal_forces(moments_from_samples(vals, l), l);
            for (a, v) in fe.iter().enumerate() {
                loads[2 * e + a] += v;
            }
        }
        loads
    }

    /// Physical coordinates of all Gauss points, ascending.
    pub fn gauss_coords(&self) -> Vec<f64> {
        let l = self.spec.element_length();
        (0..self.spec.n_elements)
            .flat_map(|e| {
                let x_e = self.spec.node_coord(e);
                gauss_points(l).map(move |(xi, _)| x_e + xi)
            })
            .collect()
    }

    pub fn solve(&self, pressure: impl Fn(f64) -> f64) -> Result<FemSolution> {
        let samples: Vec<f64> = self.gauss_coords().into_iter().map(pressure).collect();
        self.solve_nodal(&self.assemble_loads(&samples))
    }
}

impl FemSolution {
    /// Deflection at `x` by Hermite interpolation inside the owning element.
    pub fn deflection_at(&self, spec: &BeamSpec, x: f64) -> f64 {
        let l = spec.element_length();
        let pos = x / l;
        let nearest = pos.round();
        if (pos - nearest).abs() <= 1e-9 && nearest >= 0.0 && (nearest as usize) <= spec.n_elements {
            return self.nodal_deflections[nearest as usize];
        }
        let e = (pos.floor().max(0.0) as usize).min(spec.n_elements - 1);
        let xi = x - spec.node_coord(e);
        let n = shape_functions(xi, l);
        n[0] * self.nodal_deflections[e]
            + n[1] * self.nodal_rotations[e]
            + n[2] * self.nodal_deflections[e + 1]
            + n[3] * self.nodal_rotations[e + 1]
    }
}

/// Assembles, constrains and solves the beam under `pressure`.
pub fn solve_beam(spec: &BeamSpec, pressure: impl Fn(f64) -> f64) -> Result<FemSolution> {
    BeamSolver::new(spec)?.solve(pressure)
}

/// Forward model mapping a pressure curve on the beam to deflections.
#[derive(Debug, Clone)]
pub struct BeamForward {
    solver: BeamSolver,
    gauss_coords: Vec<f64>,
}

impl BeamForward {
    pub fn new(spec: &BeamSpec) -> Result<Self> {
        let solver = BeamSolver::new(spec)?;
        let gauss_coords = solver.gauss_coords();
        Ok(Self {
            solver,
            gauss_coords,
        })
    }

    pub fn solver(&self) -> &BeamSolver {
        &self.solver
    }

    pub fn solve_curve(&self, curve: &Curve) -> Result<FemSolution> {
        let (lo, hi) = curve.domain();
        let tol = 1e-9 * self.solver.spec.length;
        if (lo - 0.0).abs() > tol || (hi - self.solver.spec.length).abs() > tol {
            return Err(Error::Beam(format!(
                "curve domain [{lo}, {hi}] must span the beam [0, {}]",
                self.solver.spec.length
            )));
        }
        let mut samples = Vec::new();
        curve.eval_into(&self.gauss_coords, &mut samples);
        self.solver.solve_nodal(&self.solver.assemble_loads(&samples))
    }
}

impl ForwardModel for BeamForward {
    fn predict(&self, curve: &Curve, coords: &[f64]) -> Result<Vec<f64>> {
        let spec = &self.solver.spec;
        if let Some(&x) = coords.iter().find(|&&x| !(x >= 0.0 && x <= spec.length)) {
            return Err(Error::OutOfDomain {
                x,
                lo: 0.0,
                hi: spec.length,
            });
        }
        let sol = self.solve_curve(curve)?;
        Ok(coords.iter().map(|&x| sol.deflection_at(spec, x)).collect())
    }
}

/// Builds the beam forward model `g(f, x)`.
pub fn beam_forward(spec: &BeamSpec) -> Result<BeamForward> {
    BeamForward::new(spec)
}
