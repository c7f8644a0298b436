use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Anything that assigns action probabilities per state.
pub trait Policy<T: Scalar> {
    fn n_states(&self) -> usize;
    /// Calls `f(a, π(a|s))` for every action with nonzero probability.
    fn for_each_action(&self, s: usize, n_actions: usize, f: impl FnMut(usize, T));
    /// Checks compatibility with an MDP's action count.
    fn check_actions(&self, n_actions: usize) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeterministicPolicy(Vec<usize>);

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>, n_actions: usize) -> Result<Self> {
        let p = Self(actions);
        <Self as Policy<f64>>::check_actions(&p, n_actions)?;
        Ok(p)
    }

    pub fn constant(n_states: usize, action: usize) -> Self {
        Self(vec![action; n_states])
    }

    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        Self((0..n_states).map(|_| rng.random_range(0..n_actions)).collect())
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Point-mass rows.
    pub fn to_stochastic<T: Scalar>(&self, n_actions: usize) -> StochasticPolicy<T> {
        StochasticPolicy {
            probs: Matrix::from_fn(self.0.len(), n_actions, |s, a| {
                if self.0[s] == a {
                    T::one()
                } else {
                    T::zero()
                }
            }),
        }
    }
}

impl<T: Scalar> Policy<T> for DeterministicPolicy {
    fn n_states(&self) -> usize {
        self.0.len()
    }

    fn for_each_action(&self, s: usize, _n_actions: usize, mut f: impl FnMut(usize, T)) {
        f(self.0[s], T::one());
    }

    fn check_actions(&self, n_actions: usize) -> Result<()> {
        match self.0.iter().position(|&a| a >= n_actions) {
            Some(s) => Err(Error::config(format!(
                "policy action {} at state {s} is out of range for {n_actions} actions",
                self.0[s]
            ))),
            None => Ok(()),
        }
    }
}

/// Row-stochastic `π(a|s)` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StochasticPolicy<T: Scalar> {
    probs: Matrix<T>,
}

impl<T: Scalar> StochasticPolicy<T> {
    pub fn new(probs: Matrix<T>) -> Result<Self> {
        let tol = T::lit(T::PROB_TOL);
        for s in 0..probs.rows() {
            let row = probs.row(s);
            if row.iter().any(|&p| !(p >= T::zero())) {
                return Err(Error::config(format!("negative probability at state {s}")));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::config(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = T::one() / T::from_usize_lossy(n_actions);
        Self {
            probs: Matrix::from_fn(n_states, n_actions, |_, _| p),
        }
    }

    /// Each row drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Matrix::zeros(n_states, n_actions);
        for s in 0..n_states {
            for (dst, p) in probs
                .row_mut(s)
                .iter_mut()
                .zip(crate::rng::simplex_point(rng, n_actions))
            {
                *dst = T::lit(p);
            }
        }
        Self { probs }
    }

    pub fn probs(&self) -> &Matrix<T> {
        &self.probs
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[(s, a)]
    }

    pub fn row(&self, s: usize) -> &[T] {
        self.probs.row(s)
    }

    pub fn n_actions(&self) -> usize {
        self.probs.cols()
    }

    /// Most likely action per state, ties to the lowest index.
    pub fn mode(&self) -> DeterministicPolicy {
        DeterministicPolicy(
            (0..self.probs.rows())
                .map(|s| {
                    let row = self.row(s);
                    let mut best = 0;
                    for a in 1..row.len() {
                        if row[a] > row[best] {
                            best = a;
                        }
                    }
                    best
                })
                .collect(),
        )
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        let u = T::lit(rng.random::<f64>());
        let row = self.row(s);
        let mut acc = T::zero();
        for (a, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        row.iter().rposition(|&p| p > T::zero()).unwrap_or(row.len() - 1)
    }
}

impl<T: Scalar> Policy<T> for StochasticPolicy<T> {
    fn n_states(&self) -> usize {
        self.probs.rows()
    }

    fn for_each_action(&self, s: usize, _n_actions: usize, mut f: impl FnMut(usize, T)) {
        for (a, &p) in self.row(s).iter().enumerate() {
            if p != T::zero() {
                f(a, p);
            }
        }
    }

    fn check_actions(&self, n_actions: usize) -> Result<()> {
        check_dim("policy actions", n_actions, self.probs.cols())
    }
}
