//! Birth, Death and Move proposals and the reversible jump acceptance rule.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KnotModel;
use crate::problem::Problem;

/// Source of proposal scales for Birth/Death and Move.
pub trait ProposalTuning {
    /// Variance of the Gaussian used to draw a new knot value at `site`.
    fn birth_variance(&self, site: usize) -> f64;
    /// Covariance of the joint perturbation of the knots at `indices`.
    fn move_covariance(&self, indices: &[usize]) -> DMatrix<f64>;
}

/// Conventional proposals: fixed birth variance and isotropic Move covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedTuning {
    pub birth_variance: f64,
    pub move_variance: f64,
}

impl Default for FixedTuning {
    fn default() -> Self {
        Self {
            birth_variance: 1.0,
            move_variance: 1.0,
        }
    }
}

impl ProposalTuning for FixedTuning {
    fn birth_variance(&self, _site: usize) -> f64 {
        self.birth_variance
    }

    fn move_covariance(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::identity(indices.len(), indices.len()) * self.move_variance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Birth,
    Death,
    Move,
}

impl ProposalKind {
    pub const ALL: [ProposalKind; 3] = [ProposalKind::Birth, ProposalKind::Death, ProposalKind::Move];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A candidate state with its forward and reverse proposal log densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalOutcome {
    pub kind: ProposalKind,
    pub candidate: KnotModel,
    pub log_forward: f64,
    pub log_reverse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Ready(ProposalOutcome),
    /// No valid candidate exists (full grid for Birth, two knots for Death).
    Blocked(ProposalKind),
}

/// Log density of `N(mean, var)` at `x`.
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
}

/// Adds a knot at a uniformly chosen free site, centred on the current curve.
pub fn propose_birth<R: Rng + ?Sized>(
    current: &KnotModel,
    problem: &Problem,
    tuning: &dyn ProposalTuning,
    rng: &mut R,
) -> Proposal {
    let grid = problem.grid();
    let n_free = grid.len() - current.n();
    if n_free == 0 {
        return Proposal::Blocked(ProposalKind::Birth);
    }
    let site = nth_free_site(current, rng.random_range(0..n_free));
    let anchor = problem
        .curve(current)
        .eval(grid.coord(site))
        .expect("grid coordinates lie in the curve domain");
    let var = tuning.birth_variance(site);
    let z: f64 = StandardNormal.sample(rng);
    let value = anchor + var.sqrt() * z;
    let mut candidate = current.clone();
    candidate.insert(site, value);
    let n_new = candidate.n();
    Proposal::Ready(ProposalOutcome {
        kind: ProposalKind::Birth,
        log_forward: -(n_free as f64).ln() + log_normal_pdf(value, anchor, var),
        log_reverse: -((n_new - 2) as f64).ln(),
        candidate,
    })
}

/// Removes a uniformly chosen interior knot.
pub fn propose_death<R: Rng + ?Sized>(
    current: &KnotModel,
    problem: &Problem,
    tuning: &dyn ProposalTuning,
    rng: &mut R,
) -> Proposal {
    let n = current.n();
    if n <= 2 {
        return Proposal::Blocked(ProposalKind::Death);
    }
    let position = 1 + rng.random_range(0..n - 2);
    let mut candidate = current.clone();
    let (site, value) = candidate.remove(position);
    let grid = problem.grid();
    let anchor = problem
        .curve(&candidate)
        .eval(grid.coord(site))
        .expect("grid coordinates lie in the curve domain");
    let var = tuning.birth_variance(site);
    let n_free_after = grid.len() - candidate.n();
    Proposal::Ready(ProposalOutcome {
        kind: ProposalKind::Death,
        log_forward: -((n - 2) as f64).ln(),
        log_reverse: -(n_free_after as f64).ln() + log_normal_pdf(value, anchor, var),
        candidate,
    })
}

/// Jointly perturbs every knot value by a draw from `N(0, cov)`.
///
/// The proposal is symmetric, so both log densities are zero. A covariance
/// that fails Cholesky factorization gets one small diagonal jitter before
/// the move is abandoned with [`Error::NotPositiveDefinite`].
pub fn propose_move<R: Rng + ?Sized>(current: &KnotModel, cov: &DMatrix<f64>, rng: &mut R) -> Result<ProposalOutcome> {
    let n = current.n();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: cov.nrows(),
        });
    }
    let chol = match cov.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-10 * cov.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
            let mut fixed = cov.clone();
            for i in 0..n {
                fixed[(i, i)] += jitter;
            }
            fixed.cholesky().ok_or(Error::NotPositiveDefinite)?
        }
    };
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let step = chol.l() * z;
    let mut candidate = current.clone();
    for (v, s) in candidate.values_mut().iter_mut().zip(step.iter()) {
        *v += s;
    }
    Ok(ProposalOutcome {
        kind: ProposalKind::Move,
        candidate,
        log_forward: 0.0,
        log_reverse: 0.0,
    })
}

/// Draws a proposal of the given kind.
pub fn propose<R: Rng + ?Sized>(
    kind: ProposalKind,
    current: &KnotModel,
    problem: &Problem,
    tuning: &dyn ProposalTuning,
    rng: &mut R,
) -> Result<Proposal> {
    Ok(match kind {
        ProposalKind::Birth => propose_birth(current, problem, tuning, rng),
        ProposalKind::Death => propose_death(current, problem, tuning, rng),
        ProposalKind::Move => {
            let cov = tuning.move_covariance(current.indices());
            Proposal::Ready(propose_move(current, &cov, rng)?)
        }
    })
}

/// A model with its cached log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub model: KnotModel,
    pub log_lik: f64,
}

impl ChainState {
    pub fn new(model: KnotModel, problem: &Problem) -> Result<Self> {
        model.validate(problem.grid())?;
        let log_lik = problem.log_likelihood(&model)?;
        Ok(Self { model, log_lik })
    }
}

/// Acceptance log probability and, when the candidate lies inside the prior
/// support, its log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub log_alpha: f64,
    pub candidate_log_lik: Option<f64>,
}

/// `min(0, temperature * dLL + dlog prior + log q_reverse - log q_forward)`.
///
/// `temperature` is the exponent applied to the likelihood (1 for the
/// target chain).
pub fn log_accept_ratio(
    current: &ChainState,
    outcome: &ProposalOutcome,
    problem: &Problem,
    temperature: f64,
) -> Result<Acceptance> {
    let lp_new = problem.log_prior(&outcome.candidate);
    if lp_new == f64::NEG_INFINITY {
        return Ok(Acceptance {
            log_alpha: f64::NEG_INFINITY,
            candidate_log_lik: None,
        });
    }
    let lp_old = problem.log_prior(&current.model);
    let ll_new = problem.log_likelihood(&outcome.candidate)?;
    let log_r = temperature * (ll_new - current.log_lik) + (lp_new - lp_old) + outcome.log_reverse - outcome.log_forward;
    let log_alpha = if log_r.is_nan() { f64::NEG_INFINITY } else { log_r.min(0.0) };
    Ok(Acceptance {
        log_alpha,
        candidate_log_lik: Some(ll_new),
    })
}

/// Outcome of one sampler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub kind: ProposalKind,
    pub accepted: bool,
    pub blocked: bool,
    /// `-inf` for blocked proposals.
    pub log_alpha: f64,
}

/// One reversible jump step: pick Birth/Death/Move with probability 1/3 each,
/// propose, accept or reject. Blocked proposals count as rejections.
pub fn rjmcmc_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    problem: &Problem,
    temperature: f64,
    tuning: &dyn ProposalTuning,
    rng: &mut R,
) -> Result<StepRecord> {
    let kind = ProposalKind::ALL[rng.random_range(0..3)];
    let outcome = match propose(kind, &state.model, problem, tuning, rng)? {
        Proposal::Ready(o) => o,
        Proposal::Blocked(kind) => {
            return Ok(StepRecord {
                kind,
                accepted: false,
                blocked: true,
                log_alpha: f64::NEG_INFINITY,
            })
        }
    };
    let acc = log_accept_ratio(state, &outcome, problem, temperature)?;
    let u: f64 = rng.random();
    let accepted = u.ln() < acc.log_alpha;
    if accepted {
        state.model = outcome.candidate;
        state.log_lik = acc.candidate_log_lik.expect("accepted candidates have a likelihood");
    }
    Ok(StepRecord {
        kind,
        accepted,
        blocked: false,
        log_alpha: acc.log_alpha,
    })
}

fn nth_free_site(model: &KnotModel, k: usize) -> usize {
    // Free sites below occupied index `indices[p]` number `indices[p] - p`.
    let idx = model.indices();
    let p = idx.partition_point(|&site| {
        let pos = idx.binary_search(&site).unwrap_or(0);
        site - pos <= k
    });
    k + p
}
