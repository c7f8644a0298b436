//! Markovian sample collection for the critic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::mdp::{stationary_analysis, ChainStatus, Mdp, StochasticPolicy};
use crate::rng::Rng as ChaRng;
use crate::scalar::Scalar;

pub const BURN_IN_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Trajectory<T: Scalar> {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// Number of visited pairs, `m + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SampleBatch<T: Scalar> {
    /// `(s_l, a_l)` read off one long chain after burn-in.
    pub pairs: Vec<(usize, usize)>,
    /// Rollout of length `m` branching from each pair.
    pub trajectories: Vec<Trajectory<T>>,
    pub burn_in: usize,
    pub status: ChainStatus,
}

/// Default burn-in `50 / gap`, capped.
pub fn default_burn_in(spectral_gap: f64) -> usize {
    if spectral_gap > 0.0 {
        ((50.0 / spectral_gap).ceil() as usize).min(BURN_IN_CAP)
    } else {
        BURN_IN_CAP
    }
}

pub(crate) fn sample_index<T: Scalar>(probs: &[T], rng: &mut ChaRng) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > T::zero()).unwrap_or(probs.len() - 1)
}

pub(crate) fn step<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    s: usize,
    a: usize,
    rng: &mut ChaRng,
) -> (usize, usize) {
    let next = sample_index(mdp.transition_row(s, a), rng);
    (next, sample_index(policy.row(next), rng))
}

/// Runs the chain for `burn_in` steps from `ρ₀` (default from the spectral gap)
/// and returns the state-action pair reached.
pub(crate) fn burned_in_pair<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    burn_in: usize,
    rng: &mut ChaRng,
) -> (usize, usize) {
    let s = sample_index(mdp.initial_dist(), rng);
    let mut cur = (s, sample_index(policy.row(s), rng));
    for _ in 0..burn_in {
        cur = step(mdp, policy, cur.0, cur.1, rng);
    }
    cur
}

pub fn collect_samples<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    n: usize,
    m: usize,
    burn_in: Option<usize>,
    rng: &mut ChaRng,
) -> Result<SampleBatch<T>> {
    if n == 0 || m == 0 {
        return Err(Error::config("collect_samples needs N ≥ 1 and m ≥ 1"));
    }
    check_dim("policy states", mdp.n_states(), policy.probs().rows())?;
    let analysis = stationary_analysis(mdp, policy)?;
    let burn_in = burn_in.unwrap_or_else(|| default_burn_in(analysis.spectral_gap));
    let mut cur = burned_in_pair(mdp, policy, burn_in, rng);
    let mut pairs = Vec::with_capacity(n);
    let mut trajectories = Vec::with_capacity(n);
    for _ in 0..n {
        pairs.push(cur);
        let mut traj = Trajectory {
            states: Vec::with_capacity(m + 1),
            actions: Vec::with_capacity(m + 1),
            rewards: Vec::with_capacity(m + 1),
        };
        let mut at = cur;
        for i in 0..=m {
            traj.states.push(at.0);
            traj.actions.push(at.1);
            traj.rewards.push(mdp.reward(at.0, at.1));
            if i < m {
                at = step(mdp, policy, at.0, at.1, rng);
            }
        }
        trajectories.push(traj);
        cur = step(mdp, policy, cur.0, cur.1, rng);
    }
    Ok(SampleBatch {
        pairs,
        trajectories,
        burn_in,
        status: analysis.status,
    })
}
