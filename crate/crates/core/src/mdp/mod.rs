//! Finite MDPs, policies, Bellman operators and stationary analysis.

mod bellman;
mod policy;
mod random;
mod stationary;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use bellman::{
    bellman_eval, bellman_optimal, greedy, induce_policy_matrices, policy_q, policy_value, q_from_values,
    PolicyMatrices,
};
pub use policy::{DeterministicPolicy, Policy, StochasticPolicy};
pub use random::random_mdp;
pub use stationary::{stationary_analysis, stationary_of_chain, ChainStatus, StationaryAnalysis};

/// Finite discounted MDP `(S, A, P, r, γ, ρ₀)`.
///
/// Transitions are stored densely, indexed `(s, a, s')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpFile<T>", into = "MdpFile<T>", bound = "T: Scalar")]
pub struct Mdp<T: Scalar> {
    n_states: usize,
    n_actions: usize,
    transition: Vec<T>,
    reward: Vec<T>,
    gamma: T,
    initial_dist: Vec<T>,
    r_max: T,
}

impl<T: Scalar> Mdp<T> {
    /// Validates and builds an MDP. `r_max` defaults to `max |r(s,a)|`.
    pub fn new(transition: Vec<Vec<Vec<T>>>, reward: Vec<Vec<T>>, gamma: T, initial_dist: Vec<T>) -> Result<Self> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("MDP needs at least one state and one action"));
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for per_state in &transition {
            check_dim("transition actions", n_actions, per_state.len())?;
            for row in per_state {
                check_dim("transition row", n_states, row.len())?;
                flat.extend_from_slice(row);
            }
        }
        check_dim("reward states", n_states, reward.len())?;
        let mut rflat = Vec::with_capacity(n_states * n_actions);
        for row in &reward {
            check_dim("reward actions", n_actions, row.len())?;
            rflat.extend_from_slice(row);
        }
        Self::from_flat(n_states, n_actions, flat, rflat, gamma, initial_dist)
    }

    /// Builds from flat row-major storage: `transition[(s·A + a)·S + s']`, `reward[s·A + a]`.
    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transition: Vec<T>,
        reward: Vec<T>,
        gamma: T,
        initial_dist: Vec<T>,
    ) -> Result<Self> {
        check_dim("transition size", n_states * n_actions * n_states, transition.len())?;
        check_dim("reward size", n_states * n_actions, reward.len())?;
        check_dim("initial_dist size", n_states, initial_dist.len())?;
        let r_max = reward.iter().fold(T::zero(), |m, r| m.max(r.abs()));
        let mdp = Self {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            initial_dist,
            r_max,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Declares a reward bound; it must dominate every `|r(s,a)|`.
    pub fn with_r_max(mut self, r_max: T) -> Result<Self> {
        self.r_max = r_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(T::PROB_TOL);
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::config(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.transition_row(s, a);
                if row.iter().any(|&p| !(p >= T::zero())) {
                    return Err(Error::config(format!("negative or NaN transition at ({s},{a})")));
                }
                let sum: T = row.iter().copied().sum();
                if (sum - T::one()).abs() > tol {
                    return Err(Error::config(format!("transition row ({s},{a}) sums to {sum}, not 1")));
                }
            }
        }
        if self.initial_dist.iter().any(|&p| !(p >= T::zero())) {
            return Err(Error::config("initial_dist has a negative entry"));
        }
        let sum: T = self.initial_dist.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::config(format!("initial_dist sums to {sum}, not 1")));
        }
        if self.reward.iter().any(|r| !r.is_finite() || r.abs() > self.r_max) {
            return Err(Error::config(format!("a reward exceeds r_max = {}", self.r_max)));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn initial_dist(&self) -> &[T] {
        &self.initial_dist
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.reward[s * self.n_actions + a]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[T] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> T {
        self.transition_row(s, a)[next]
    }

    /// Nested `(s, a, s')` copy of the transition tensor.
    pub fn transition_tensor(&self) -> Vec<Vec<Vec<T>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| self.transition_row(s, a).to_vec())
                    .collect()
            })
            .collect()
    }

    pub fn reward_table(&self) -> Matrix<T> {
        Matrix::from_fn(self.n_states, self.n_actions, |s, a| self.reward(s, a))
    }

    /// Same MDP with a different discount.
    pub fn with_gamma(&self, gamma: T) -> Result<Self> {
        let mut m = self.clone();
        m.gamma = gamma;
        m.validate()?;
        Ok(m)
    }

    /// Converts the scalar type, e.g. to run the same instance in `f32`.
    pub fn cast<U: Scalar>(&self) -> Result<Mdp<U>> {
        let c = |x: &T| U::lit(x.to_f64_lossy());
        let mut m = Mdp::from_flat(
            self.n_states,
            self.n_actions,
            self.transition.iter().map(c).collect(),
            self.reward.iter().map(c).collect(),
            c(&self.gamma),
            self.initial_dist.iter().map(c).collect(),
        );
        if let Ok(ref mut mdp) = m {
            mdp.r_max = mdp.r_max.max(c(&self.r_max));
        }
        m
    }
}

/// On-disk form of an [`Mdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MdpFile<T: Scalar> {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: T,
    pub transition: Vec<Vec<Vec<T>>>,
    pub reward: Vec<Vec<T>>,
    pub initial_dist: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<T>,
}

impl<T: Scalar> TryFrom<MdpFile<T>> for Mdp<T> {
    type Error = Error;

    fn try_from(f: MdpFile<T>) -> Result<Self> {
        check_dim("n_states", f.n_states, f.transition.len())?;
        let mdp = Mdp::new(f.transition, f.reward, f.gamma, f.initial_dist)?;
        check_dim("n_actions", f.n_actions, mdp.n_actions)?;
        match f.r_max {
            Some(r) => mdp.with_r_max(r),
            None => Ok(mdp),
        }
    }
}

impl<T: Scalar> From<Mdp<T>> for MdpFile<T> {
    fn from(m: Mdp<T>) -> Self {
        Self {
            n_states: m.n_states,
            n_actions: m.n_actions,
            gamma: m.gamma,
            transition: m.transition_tensor(),
            reward: m.reward_table().to_rows(),
            initial_dist: m.initial_dist.clone(),
            r_max: Some(m.r_max),
        }
    }
}
