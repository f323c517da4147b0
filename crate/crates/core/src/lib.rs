//! Trans-dimensional Bayesian curve fitting over free-knot piecewise curves.
//!
//! Knot locations live on a fixed [`CandidateGrid`]; the number of knots,
//! their locations and values are sampled jointly by reversible jump MCMC
//! with optional adaptive proposals learned from the interpolated sampling
//! history and optional parallel tempering.

pub mod adapt;
pub mod beam;
pub mod chain;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod grid;
pub mod likelihood;
pub mod model;
#[cfg(any(test, feature = "oracles"))]
pub mod oracle;
pub mod prior;
pub mod problem;
pub mod rjmcmc;
pub mod sampler;
pub mod tempering;
pub mod trace;

pub use error::{Error, Result};
pub use grid::{build_grid, CandidateGrid};
pub use likelihood::{log_likelihood, Dataset, ForwardModel, IdentityForward};
pub use model::{curve_on_grid, interpolate, BasisKind, Curve, KnotModel};
pub use prior::{log_prior, CountPrior, PriorSpec};
pub use problem::Problem;
pub use sampler::{run_sampler, SamplerKind, SamplerSettings};
pub use trace::RunTrace;
