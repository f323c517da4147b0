//! A single Markov chain: state, proposal tuning and random stream.
//!
//! Adaptive chains run conventional proposals for the first `t0` steps while
//! collecting interpolated curves, seed the adaptive state from that history
//! and then update it after every step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::{AdaptSettings, AdaptiveState, ScaleUpdate};
use crate::error::{Error, Result};
use crate::model::fill_curve_on_grid;
use crate::problem::Problem;
use crate::rjmcmc::{rjmcmc_step, ChainState, FixedTuning, ProposalKind, ProposalTuning, StepRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub adaptive: bool,
    /// Length of the conventional warm-up that seeds the adaptive history.
    pub t0: u64,
    pub conventional: FixedTuning,
    pub adapt: AdaptSettings,
}

impl ChainSettings {
    pub fn conventional(tuning: FixedTuning) -> Self {
        Self {
            adaptive: false,
            t0: 0,
            conventional: tuning,
            adapt: AdaptSettings::new(1e-8),
        }
    }

    pub fn adaptive(t0: u64, conventional: FixedTuning, adapt: AdaptSettings) -> Self {
        Self {
            adaptive: true,
            t0,
            conventional,
            adapt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.adaptive {
            if self.t0 < 2 {
                return Err(Error::Config(format!("t0 must be at least 2, got {}", self.t0)));
            }
            self.adapt.validate()?;
        }
        if !(self.conventional.birth_variance > 0.0 && self.conventional.move_variance > 0.0) {
            return Err(Error::Config("conventional proposal variances must be positive".into()));
        }
        Ok(())
    }
}

/// Per-kind proposal counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptCounters {
    pub attempts: [u64; 3],
    pub accepts: [u64; 3],
    pub blocked: [u64; 3],
}

impl AcceptCounters {
    pub fn record(&mut self, rec: &StepRecord) {
        let k = rec.kind.index();
        self.attempts[k] += 1;
        self.accepts[k] += rec.accepted as u64;
        self.blocked[k] += rec.blocked as u64;
    }

    pub fn rate(&self, kind: ProposalKind) -> f64 {
        let k = kind.index();
        if self.attempts[k] == 0 {
            0.0
        } else {
            self.accepts[k] as f64 / self.attempts[k] as f64
        }
    }
}

#[derive(Debug, Clone)]
enum Phase {
    Conventional,
    Warmup(Vec<Vec<f64>>),
    Adaptive(Box<AdaptiveState>),
}

/// What happened during one chain step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub record: StepRecord,
    /// Largest covariance entry change from this step's history update.
    pub cov_increment: Option<f64>,
    /// Dynamic-scale update made after an adaptive Move.
    pub scale_update: Option<ScaleUpdate>,
}

#[derive(Debug, Clone)]
pub struct Chain {
    state: ChainState,
    temperature: f64,
    settings: ChainSettings,
    phase: Phase,
    rng: ChaCha8Rng,
    steps: u64,
    counters: AcceptCounters,
    curve_buf: Vec<f64>,
}

impl Chain {
    pub fn new(state: ChainState, temperature: f64, settings: ChainSettings, rng: ChaCha8Rng) -> Result<Self> {
        settings.validate()?;
        if !(temperature > 0.0 && temperature <= 1.0) {
            return Err(Error::Config(format!("temperature must lie in (0, 1], got {temperature}")));
        }
        let phase = if settings.adaptive {
            Phase::Warmup(Vec::with_capacity(settings.t0 as usize))
        } else {
            Phase::Conventional
        };
        Ok(Self {
            state,
            temperature,
            settings,
            phase,
            rng,
            steps: 0,
            counters: AcceptCounters::default(),
            curve_buf: Vec::new(),
        })
    }

    /// Chain started from the problem's default initial model with a seeded stream.
    pub fn from_seed(problem: &Problem, settings: ChainSettings, seed: u64, stream: u64) -> Result<Self> {
        let state = ChainState::new(problem.initial_model()?, problem)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self::new(state, 1.0, settings, rng)
    }

    pub fn step(&mut self, problem: &Problem) -> Result<StepInfo> {
        let tuning: &dyn ProposalTuning = match &self.phase {
            Phase::Adaptive(a) => a.as_ref(),
            _ => &self.settings.conventional,
        };
        let record = rjmcmc_step(&mut self.state, problem, self.temperature, tuning, &mut self.rng)?;
        self.counters.record(&record);
        self.steps += 1;

        let mut info = StepInfo {
            record,
            cov_increment: None,
            scale_update: None,
        };
        if matches!(self.phase, Phase::Conventional) {
            return Ok(info);
        }
        fill_curve_on_grid(&self.state.model, problem.grid(), problem.basis(), &mut self.curve_buf);
        match &mut self.phase {
            Phase::Adaptive(a) => {
                if record.kind == ProposalKind::Move && !record.blocked {
                    info.scale_update = Some(a.update_scale(record.log_alpha.exp()));
                }
                info.cov_increment = Some(a.update_history(&self.curve_buf)?);
            }
            Phase::Warmup(history) => {
                history.push(self.curve_buf.clone());
                if self.steps >= self.settings.t0 {
                    let state = AdaptiveState::init_history(history, self.settings.adapt)?;
                    self.phase = Phase::Adaptive(Box::new(state));
                }
            }
            Phase::Conventional => unreachable!(),
        }
        Ok(info)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ChainState {
        &mut self.state
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn set_temperature(&mut self, temperature: f64) {
        self.temperature = temperature;
    }

    pub fn adaptive_state(&self) -> Option<&AdaptiveState> {
        match &self.phase {
            Phase::Adaptive(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_adapting(&self) -> bool {
        matches!(self.phase, Phase::Adaptive(_))
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn counters(&self) -> &AcceptCounters {
        &self.counters
    }

    pub fn settings(&self) -> &ChainSettings {
        &self.settings
    }
}
