//! Trial tallies and reproducible parallel trial loops.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ec_round::{Crash, TrialOutcome};

/// Outcome counts of a batch of two-round trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub n_u: u64,
    pub n_l: u64,
    pub n_n: u64,
    pub discarded: u64,
    pub stalls: u64,
}

impl Tally {
    pub fn record(&mut self, outcome: TrialOutcome) {
        self.trials += 1;
        match outcome {
            TrialOutcome::Second(Crash::Unlocated) => self.n_u += 1,
            TrialOutcome::Second(Crash::Located) => self.n_l += 1,
            TrialOutcome::Second(Crash::None) => self.n_n += 1,
            TrialOutcome::Discarded => self.discarded += 1,
            TrialOutcome::Stall => self.stalls += 1,
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.n_u += other.n_u;
        self.n_l += other.n_l;
        self.n_n += other.n_n;
        self.discarded += other.discarded;
        self.stalls += other.stalls;
        self
    }

    /// Unlocated crash rate E = N_U / (N_U + N_N).
    pub fn unlocated_rate(&self) -> Option<f64> {
        let d = self.n_u + self.n_n;
        (d > 0).then(|| self.n_u as f64 / d as f64)
    }

    /// Located crash rate Γ = N_L / (N_U + N_N + N_L).
    pub fn located_rate(&self) -> Option<f64> {
        let d = self.n_u + self.n_n + self.n_l;
        (d > 0).then(|| self.n_l as f64 / d as f64)
    }

    /// Binomial standard errors of the two rates.
    pub fn unlocated_sigma(&self) -> Option<f64> {
        let e = self.unlocated_rate()?;
        Some((e * (1.0 - e) / (self.n_u + self.n_n) as f64).sqrt())
    }

    pub fn located_sigma(&self) -> Option<f64> {
        let g = self.located_rate()?;
        Some((g * (1.0 - g) / (self.n_u + self.n_n + self.n_l) as f64).sqrt())
    }

    pub fn is_consistent(&self) -> bool {
        self.n_u + self.n_l + self.n_n + self.discarded + self.stalls == self.trials
    }
}

/// Random stream of one trial, independent of how trials are scheduled.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point.to_le_bytes());
    key[16..24].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Runs `trials` trials on the current rayon pool.
pub fn run_trials<F>(trials: u64, seed: u64, point: u64, trial: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng) -> TrialOutcome + Sync,
{
    (0..trials)
        .into_par_iter()
        .fold(Tally::default, |mut t, i| {
            t.record(trial(&mut trial_rng(seed, point, i)));
            t
        })
        .reduce(Tally::default, Tally::merge)
}

/// Outcomes of `trials` trials in trial order.
pub fn trial_outcomes<F>(trials: u64, seed: u64, point: u64, trial: F) -> Vec<TrialOutcome>
where
    F: Fn(&mut ChaCha8Rng) -> TrialOutcome + Sync,
{
    (0..trials).into_par_iter().map(|i| trial(&mut trial_rng(seed, point, i))).collect()
}
