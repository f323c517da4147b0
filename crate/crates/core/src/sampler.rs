//! The four sampler variants behind one runner.

use serde::{Deserialize, Serialize};

use crate::adapt::AdaptSettings;
use crate::chain::{Chain, ChainSettings};
use crate::error::{Error, Result};
use crate::model::fill_curve_on_grid;
use crate::problem::Problem;
use crate::rjmcmc::FixedTuning;
use crate::tempering::{ChainEnsemble, Ladder, LadderAdaptation, SweepInfo};
use crate::trace::{RunTrace, TraceMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Rjmcmc,
    ApRjmcmc,
    PtRjmcmc,
    ApPtRjmcmc,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Rjmcmc,
        SamplerKind::ApRjmcmc,
        SamplerKind::PtRjmcmc,
        SamplerKind::ApPtRjmcmc,
    ];

    pub fn adaptive(self) -> bool {
        matches!(self, SamplerKind::ApRjmcmc | SamplerKind::ApPtRjmcmc)
    }

    pub fn tempered(self) -> bool {
        matches!(self, SamplerKind::PtRjmcmc | SamplerKind::ApPtRjmcmc)
    }

    pub fn label(self) -> &'static str {
        match self {
            SamplerKind::Rjmcmc => "RJMCMC",
            SamplerKind::ApRjmcmc => "AP-RJMCMC",
            SamplerKind::PtRjmcmc => "PT-RJMCMC",
            SamplerKind::ApPtRjmcmc => "AP-PT-RJMCMC",
        }
    }
}

/// Sampler tunables. Steps count sweeps of the whole ladder for tempered variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub kind: SamplerKind,
    pub steps: u64,
    pub t0: u64,
    pub n_temperatures: usize,
    pub t_min: f64,
    /// Fraction of the run during which the ladder adapts.
    pub burn_in_fraction: f64,
    pub ladder_window: u64,
    pub ladder_gain: f64,
    pub swap_band: (f64, f64),
    pub thin: u64,
    /// Covariance regularizer; `1e-8 * (a_max - a_min)^2` when absent.
    pub epsilon: Option<f64>,
    pub target_accept: f64,
    pub gamma_exponent: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub conventional: FixedTuning,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            kind: SamplerKind::ApPtRjmcmc,
            steps: 2_000_000,
            t0: 1000,
            n_temperatures: 10,
            t_min: 0.05,
            burn_in_fraction: 0.25,
            ladder_window: 100,
            ladder_gain: 1.0,
            swap_band: (0.1, 0.4),
            thin: 10,
            epsilon: None,
            target_accept: 0.234,
            gamma_exponent: 0.5,
            scale_min: 1e-10,
            scale_max: 1e10,
            conventional: FixedTuning::default(),
        }
    }
}

impl SamplerSettings {
    pub fn for_kind(kind: SamplerKind, steps: u64) -> Self {
        Self {
            kind,
            steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.thin == 0 {
            return Err(Error::Config("steps and thin must be positive".into()));
        }
        if self.kind.adaptive() && self.steps <= self.t0 {
            return Err(Error::Config(format!(
                "chain length {} must exceed t0 = {}",
                self.steps, self.t0
            )));
        }
        if self.kind.tempered() && self.n_temperatures == 0 {
            return Err(Error::Config("at least one temperature is required".into()));
        }
        if !(0.0..=1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config("burn-in fraction must lie in [0, 1]".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
            }
        }
        Ok(())
    }

    pub fn chain_settings(&self, problem: &Problem) -> ChainSettings {
        if self.kind.adaptive() {
            let adapt = AdaptSettings {
                epsilon: self
                    .epsilon
                    .unwrap_or_else(|| AdaptSettings::default_epsilon(problem.prior().value_range())),
                target_accept: self.target_accept,
                gamma_exponent: self.gamma_exponent,
                scale_min: self.scale_min,
                scale_max: self.scale_max,
            };
            ChainSettings::adaptive(self.t0, self.conventional, adapt)
        } else {
            ChainSettings::conventional(self.conventional)
        }
    }

    pub fn ladder(&self) -> Result<Ladder> {
        let n = if self.kind.tempered() { self.n_temperatures } else { 1 };
        Ladder::geometric(n, self.t_min)
    }

    pub fn ladder_adaptation(&self) -> Option<LadderAdaptation> {
        (self.kind.tempered() && self.n_temperatures > 1).then(|| LadderAdaptation {
            burn_in_sweeps: (self.burn_in_fraction * self.steps as f64) as u64,
            window: self.ladder_window,
            band: self.swap_band,
            gain: self.ladder_gain,
        })
    }
}

/// Builds the ensemble for `settings`: one rung per temperature, rung `i`
/// drawing from stream `i` of the seed.
pub fn build_ensemble(problem: &Problem, settings: &SamplerSettings, seed: u64) -> Result<ChainEnsemble> {
    settings.validate()?;
    let ladder = settings.ladder()?;
    let chain_settings = settings.chain_settings(problem);
    let chains = (0..ladder.len())
        .map(|i| Chain::from_seed(problem, chain_settings, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    ChainEnsemble::new(chains, ladder, settings.ladder_adaptation())
}

/// Runs a sampler and records the target chain every `thin` sweeps.
pub fn run_sampler(problem: &Problem, settings: &SamplerSettings, seed: u64) -> Result<RunTrace> {
    run_sampler_with(problem, settings, seed, |_, _, _| {})
}

/// As [`run_sampler`], calling `observe(sweep, info, ensemble)` after every sweep.
pub fn run_sampler_with<F>(problem: &Problem, settings: &SamplerSettings, seed: u64, mut observe: F) -> Result<RunTrace>
where
    F: FnMut(u64, &SweepInfo, &ChainEnsemble),
{
    let mut ensemble = build_ensemble(problem, settings, seed)?;
    let mut trace = RunTrace::new(TraceMeta::new(problem.grid().coords().to_vec(), settings.thin));
    let mut curve = Vec::with_capacity(problem.grid().len());
    for sweep in 1..=settings.steps {
        let info = ensemble.pt_sweep(problem)?;
        observe(sweep, &info, &ensemble);
        if sweep % settings.thin == 0 {
            let state = ensemble.target().state();
            fill_curve_on_grid(&state.model, problem.grid(), problem.basis(), &mut curve);
            trace.push(sweep, &curve, state.model.n(), state.log_lik);
        }
    }
    let target = ensemble.target();
    trace.meta.total_steps = settings.steps;
    trace.meta.value_range = Some((problem.prior().a_min, problem.prior().a_max));
    trace.meta.counters = *target.counters();
    trace.meta.temperatures = ensemble.ladder().temps().to_vec();
    if settings.kind.tempered() {
        trace.meta.swaps = Some(ensemble.swap_stats().clone());
    }
    if let Some(a) = target.adaptive_state() {
        trace.meta.final_log_scale = Some(a.log_scale());
        trace.meta.adaptive_variance = Some(a.variances());
    }
    Ok(trace)
}
