//! Parallel tempering: temperature ladder, ensemble sweeps with even/odd
//! adjacent swaps, and burn-in ladder adaptation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, StepInfo};
use crate::error::{Error, Result};
use crate::problem::Problem;

/// Likelihood exponents, strictly decreasing from exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    temps: Vec<f64>,
    /// `false` on even sweeps: pairs (0,1),(2,3),...
    odd: bool,
}

impl Ladder {
    /// `temps[i] = r^i` with `temps[n - 1] = t_min`.
    pub fn geometric(n: usize, t_min: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("ladder needs at least one temperature".into()));
        }
        if n > 1 && !(t_min > 0.0 && t_min < 1.0) {
            return Err(Error::Config(format!("lowest temperature must lie in (0, 1), got {t_min}")));
        }
        let temps = if n == 1 {
            vec![1.0]
        } else {
            let log_r = t_min.ln() / (n - 1) as f64;
            (0..n).map(|i| (log_r * i as f64).exp()).collect()
        };
        Self::from_temps(temps)
    }

    pub fn from_temps(temps: Vec<f64>) -> Result<Self> {
        if temps.first() != Some(&1.0) {
            return Err(Error::Config("ladder must start at temperature 1".into()));
        }
        if temps.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
            return Err(Error::Config("ladder temperatures must be strictly decreasing and positive".into()));
        }
        Ok(Self { temps, odd: false })
    }

    pub fn len(&self) -> usize {
        self.temps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temps.is_empty()
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    /// Lower index of each pair attempted on the current sweep.
    pub fn active_pairs(&self) -> impl Iterator<Item = usize> + '_ {
        let start = self.odd as usize;
        (start..self.temps.len().saturating_sub(1)).step_by(2)
    }

    pub fn flip_parity(&mut self) {
        self.odd = !self.odd;
    }

    pub fn is_odd_sweep(&self) -> bool {
        self.odd
    }

    /// Stochastic-approximation step on the log-temperature gaps: a pair whose
    /// windowed swap rate is below `band.0` has its gap shrunk, one above
    /// `band.1` has it widened, by `exp(gain * distance to band)`.
    /// `None` rates (no attempts in the window) leave the gap alone.
    pub fn adapt(&mut self, rates: &[Option<f64>], band: (f64, f64), gain: f64) {
        assert_eq!(rates.len() + 1, self.temps.len(), "one rate per adjacent pair");
        let mut gaps: Vec<f64> = self.temps.windows(2).map(|w| (w[0] / w[1]).ln()).collect();
        let mut changed = false;
        for (g, rate) in gaps.iter_mut().zip(rates) {
            let Some(r) = *rate else { continue };
            let shift = if r < band.0 {
                -(band.0 - r)
            } else if r > band.1 {
                r - band.1
            } else {
                continue;
            };
            *g = (*g * (gain * shift).exp()).clamp(1e-6, 50.0);
            changed = true;
        }
        if !changed {
            return;
        }
        let mut log_t = 0.0;
        for (t, g) in self.temps.iter_mut().skip(1).zip(&gaps) {
            log_t -= g;
            *t = log_t.exp();
        }
    }
}

/// `min(0, (temp_i - temp_j) * (ll_j - ll_i))`.
pub fn swap_log_alpha(ll_i: f64, ll_j: f64, temp_i: f64, temp_j: f64) -> f64 {
    let v = (temp_i - temp_j) * (ll_j - ll_i);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v.min(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapStats {
    pub attempts: Vec<u64>,
    pub accepts: Vec<u64>,
}

impl SwapStats {
    pub fn new(pairs: usize) -> Self {
        Self {
            attempts: vec![0; pairs],
            accepts: vec![0; pairs],
        }
    }

    pub fn rates(&self) -> Vec<Option<f64>> {
        self.attempts
            .iter()
            .zip(&self.accepts)
            .map(|(&n, &a)| (n > 0).then(|| a as f64 / n as f64))
            .collect()
    }

    fn reset(&mut self) {
        self.attempts.iter_mut().for_each(|v| *v = 0);
        self.accepts.iter_mut().for_each(|v| *v = 0);
    }
}

/// Burn-in ladder adaptation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderAdaptation {
    /// Sweeps during which the ladder may change.
    pub burn_in_sweeps: u64,
    /// Sweeps per swap-rate window.
    pub window: u64,
    pub band: (f64, f64),
    /// Initial gain; the k-th adjustment uses `gain / sqrt(k)`.
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub struct SweepInfo {
    /// One entry per rung, in ladder order.
    pub steps: Vec<StepInfo>,
    /// `(lower pair index, accepted)` for each attempted swap.
    pub swaps: Vec<(usize, bool)>,
}

#[derive(Debug, Clone)]
pub struct ChainEnsemble {
    chains: Vec<Chain>,
    ladder: Ladder,
    stats: SwapStats,
    window_stats: SwapStats,
    adaptation: Option<LadderAdaptation>,
    adaptations: u64,
    sweeps: u64,
}

impl ChainEnsemble {
    pub fn new(mut chains: Vec<Chain>, ladder: Ladder, adaptation: Option<LadderAdaptation>) -> Result<Self> {
        if chains.len() != ladder.len() {
            return Err(Error::Config(format!(
                "{} chains for a ladder of {} temperatures",
                chains.len(),
                ladder.len()
            )));
        }
        if let Some(a) = &adaptation {
            if a.window == 0 || !(a.band.0 >= 0.0 && a.band.0 < a.band.1 && a.band.1 <= 1.0) || !(a.gain > 0.0) {
                return Err(Error::Config("invalid ladder adaptation settings".into()));
            }
        }
        for (c, &t) in chains.iter_mut().zip(ladder.temps()) {
            c.set_temperature(t);
        }
        let pairs = ladder.len().saturating_sub(1);
        Ok(Self {
            chains,
            ladder,
            stats: SwapStats::new(pairs),
            window_stats: SwapStats::new(pairs),
            adaptation,
            adaptations: 0,
            sweeps: 0,
        })
    }

    /// Advances every rung one step, then runs one swap round for the current parity.
    pub fn pt_sweep(&mut self, problem: &Problem) -> Result<SweepInfo> {
        let steps: Vec<StepInfo> = if self.chains.len() > 1 && rayon::current_num_threads() > 1 {
            self.chains.par_iter_mut().map(|c| c.step(problem)).collect::<Result<_>>()?
        } else {
            self.chains.iter_mut().map(|c| c.step(problem)).collect::<Result<_>>()?
        };

        let pairs: Vec<usize> = self.ladder.active_pairs().collect();
        let mut swaps = Vec::with_capacity(pairs.len());
        for i in pairs {
            let (ti, tj) = (self.ladder.temps[i], self.ladder.temps[i + 1]);
            let (lo, hi) = self.chains.split_at_mut(i + 1);
            let (a, b) = (&mut lo[i], &mut hi[0]);
            let log_alpha = swap_log_alpha(a.state().log_lik, b.state().log_lik, ti, tj);
            let u: f64 = a.rng_mut().random();
            let accepted = u.ln() < log_alpha;
            if accepted {
                std::mem::swap(a.state_mut(), b.state_mut());
            }
            for s in [&mut self.stats, &mut self.window_stats] {
                s.attempts[i] += 1;
                s.accepts[i] += accepted as u64;
            }
            swaps.push((i, accepted));
        }
        self.ladder.flip_parity();
        self.sweeps += 1;
        self.maybe_adapt_ladder();
        Ok(SweepInfo { steps, swaps })
    }

    fn maybe_adapt_ladder(&mut self) {
        let Some(a) = self.adaptation else { return };
        if self.ladder.len() < 2 || self.sweeps > a.burn_in_sweeps || self.sweeps % a.window != 0 {
            return;
        }
        self.adaptations += 1;
        let gain = a.gain / (self.adaptations as f64).sqrt();
        let rates = self.window_stats.rates();
        self.ladder.adapt(&rates, a.band, gain);
        self.window_stats.reset();
        for (c, &t) in self.chains.iter_mut().zip(self.ladder.temps()) {
            c.set_temperature(t);
        }
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn target(&self) -> &Chain {
        &self.chains[0]
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn swap_stats(&self) -> &SwapStats {
        &self.stats
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainSettings;
    use crate::grid::build_grid;
    use crate::likelihood::Dataset;
    use crate::model::BasisKind;
    use crate::prior::PriorSpec;
    use crate::rjmcmc::{ChainState, FixedTuning};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn swap_alpha_examples() {
        assert_eq!(swap_log_alpha(-3.0, -3.0, 1.0, 0.2), 0.0);
        assert_eq!(swap_log_alpha(-3.0, -9.0, 0.5, 0.5), 0.0);
        let la = swap_log_alpha(-10.0, -12.0, 1.0, 0.5);
        assert!((la + 1.0).abs() < 1e-15);
        assert!((la.exp() - 0.3679).abs() < 1e-4);
        assert_eq!(swap_log_alpha(-12.0, -10.0, 1.0, 0.5), 0.0);
    }

    #[test]
    fn geometric_ladder() {
        let l = Ladder::geometric(10, 0.05).unwrap();
        assert_eq!(l.temps()[0], 1.0);
        assert!((l.temps()[9] - 0.05).abs() < 1e-14);
        let r = l.temps()[1];
        for w in l.temps().windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        assert_eq!(Ladder::geometric(1, 0.05).unwrap().temps(), &[1.0]);
        assert!(Ladder::from_temps(vec![1.0, 0.5, 0.5]).is_err());
        assert!(Ladder::from_temps(vec![0.9, 0.5]).is_err());
    }

    #[test]
    fn deo_parity_schedule() {
        let mut l = Ladder::geometric(6, 0.05).unwrap();
        assert_eq!(l.active_pairs().collect::<Vec<_>>(), vec![0, 2, 4]);
        l.flip_parity();
        assert_eq!(l.active_pairs().collect::<Vec<_>>(), vec![1, 3]);
        l.flip_parity();
        assert_eq!(l.active_pairs().collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(Ladder::geometric(1, 0.05).unwrap().active_pairs().count(), 0);
    }

    #[test]
    fn ladder_adaptation_directions() {
        let base = Ladder::geometric(4, 0.1).unwrap();
        let mut l = base.clone();
        l.adapt(&[Some(0.2), Some(0.3), Some(0.1)], (0.1, 0.4), 1.0);
        assert_eq!(l.temps(), base.temps());

        let mut l = base.clone();
        l.adapt(&[Some(0.0), Some(0.2), None], (0.1, 0.4), 1.0);
        let gap = |l: &Ladder, i: usize| (l.temps()[i] / l.temps()[i + 1]).ln();
        assert!(gap(&l, 0) < gap(&base, 0));
        assert!((gap(&l, 1) - gap(&base, 1)).abs() < 1e-12);
        assert!((gap(&l, 2) - gap(&base, 2)).abs() < 1e-12);
        assert_eq!(l.temps()[0], 1.0);

        let mut l = base.clone();
        l.adapt(&[Some(0.9), Some(0.9), Some(0.9)], (0.1, 0.4), 1.0);
        assert!(l.temps()[3] < base.temps()[3]);
        assert!(l.temps().windows(2).all(|w| w[1] < w[0]));
    }

    fn gaussian_problem(seed: u64) -> Problem {
        let g = build_grid(0.0, 1.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let ds: Vec<f64> = xs.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        Problem::regression(g, BasisKind::Constant, PriorSpec::uniform(2, 6, -3.0, 3.0), Dataset::new(xs, ds, 1.0).unwrap())
            .unwrap()
    }

    fn ensemble(p: &Problem, n: usize, adaptation: Option<LadderAdaptation>) -> ChainEnsemble {
        let chains = (0..n)
            .map(|i| Chain::from_seed(p, ChainSettings::conventional(FixedTuning::default()), 17, i as u64).unwrap())
            .collect();
        ChainEnsemble::new(chains, Ladder::geometric(n, 0.05).unwrap(), adaptation).unwrap()
    }

    #[test]
    fn single_rung_matches_plain_chain() {
        let p = gaussian_problem(1);
        let mut e = ensemble(&p, 1, None);
        let mut c = Chain::from_seed(&p, ChainSettings::conventional(FixedTuning::default()), 17, 0).unwrap();
        for _ in 0..300 {
            let info = e.pt_sweep(&p).unwrap();
            assert!(info.swaps.is_empty());
            c.step(&p).unwrap();
            assert_eq!(e.target().state(), c.state());
        }
    }

    #[test]
    fn swaps_permute_states() {
        let p = gaussian_problem(2);
        let mut e = ensemble(&p, 4, None);
        for sweep in 0..500 {
            // Reproduce the within-chain steps on a clone to see pre-swap states.
            let mut shadow = e.clone();
            for c in shadow.chains.iter_mut() {
                c.step(&p).unwrap();
            }
            let stepped: Vec<ChainState> = shadow.chains.iter().map(|c| c.state().clone()).collect();
            let info = e.pt_sweep(&p).unwrap();
            let after: Vec<ChainState> = e.chains().iter().map(|c| c.state().clone()).collect();
            for s in &stepped {
                assert!(after.contains(s));
            }
            let expected_pairs: Vec<usize> = if sweep % 2 == 0 { vec![0, 2] } else { vec![1] };
            assert_eq!(info.swaps.iter().map(|s| s.0).collect::<Vec<_>>(), expected_pairs);
        }
        let total: u64 = e.swap_stats().attempts.iter().sum();
        assert_eq!(total, 250 * 2 + 250);
        assert_eq!(e.chains()[2].temperature(), e.ladder().temps()[2]);
    }

    #[test]
    fn two_chain_ladder_settles_in_band() {
        let p = gaussian_problem(3);
        let adaptation = LadderAdaptation {
            burn_in_sweeps: 100_000,
            window: 200,
            band: (0.1, 0.4),
            gain: 2.0,
        };
        let chains = (0..2)
            .map(|i| Chain::from_seed(&p, ChainSettings::conventional(FixedTuning { birth_variance: 1.0, move_variance: 0.05 }), 5, i).unwrap())
            .collect();
        let mut e = ChainEnsemble::new(chains, Ladder::from_temps(vec![1.0, 1e-4]).unwrap(), Some(adaptation)).unwrap();
        for _ in 0..100_000 {
            e.pt_sweep(&p).unwrap();
        }
        let frozen = e.ladder().temps().to_vec();
        let before = e.swap_stats().clone();
        for _ in 0..20_000 {
            e.pt_sweep(&p).unwrap();
        }
        assert_eq!(e.ladder().temps(), frozen.as_slice());
        let att = e.swap_stats().attempts[0] - before.attempts[0];
        let acc = e.swap_stats().accepts[0] - before.accepts[0];
        let rate = acc as f64 / att as f64;
        assert!((0.08..=0.42).contains(&rate), "rate {rate}, temps {:?}", e.ladder().temps());
    }
}
