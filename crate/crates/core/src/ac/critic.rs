//! Linear critic `Q_ω(s,a) = ωᵀ φ(s,a)` with projected least-squares updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_l2, Lu, Matrix};
use crate::mdp::{stationary_analysis, Mdp, StochasticPolicy};
use crate::rng::Rng as ChaRng;
use crate::scalar::Scalar;

use super::sampling::SampleBatch;

/// Ridge added to the empirical Gram matrix in sampled mode.
pub const SAMPLED_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CriticModel<T: Scalar> {
    /// Row `s·|A| + a` holds `φ(s,a)`.
    features: Matrix<T>,
    n_actions: usize,
    weights: Vec<T>,
    radius: T,
}

impl<T: Scalar> CriticModel<T> {
    pub fn new(features: Matrix<T>, n_actions: usize, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::config("critic radius must be positive"));
        }
        if n_actions == 0 || !features.rows().is_multiple_of(n_actions) {
            return Err(Error::config("feature rows must be n_states·n_actions"));
        }
        let tol = T::one() + T::lit(T::PROB_TOL);
        if let Some(i) = (0..features.rows()).find(|&i| norm_l2(features.row(i)) > tol) {
            return Err(Error::config(format!("feature row {i} has norm above 1")));
        }
        let d = features.cols();
        Ok(Self {
            features,
            n_actions,
            weights: vec![T::zero(); d],
            radius,
        })
    }

    /// Tabular indicator features, `d = |S|·|A|`.
    pub fn one_hot(n_states: usize, n_actions: usize, radius: T) -> Result<Self> {
        Self::new(Matrix::identity(n_states * n_actions), n_actions, radius)
    }

    /// Gaussian features normalized to unit length.
    pub fn random_features(n_states: usize, n_actions: usize, dim: usize, radius: T, rng: &mut ChaRng) -> Result<Self> {
        let mut phi = Matrix::zeros(n_states * n_actions, dim);
        for i in 0..phi.rows() {
            let row: Vec<f64> = (0..dim)
                .map(|_| {
                    // Box-Muller; one normal per pair of uniforms keeps the stream layout simple.
                    let u1 = 1.0 - rng.random::<f64>();
                    let u2 = rng.random::<f64>();
                    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                })
                .collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            for (dst, x) in phi.row_mut(i).iter_mut().zip(row) {
                *dst = T::lit(x / norm);
            }
        }
        Self::new(phi, n_actions, radius)
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn n_pairs(&self) -> usize {
        self.features.rows()
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn phi(&self, s: usize, a: usize) -> &[T] {
        self.features.row(s * self.n_actions + a)
    }

    pub fn q(&self, s: usize, a: usize) -> T {
        dot(self.phi(s, a), &self.weights)
    }

    /// `Q_ω` as an `|S| × |A|` table.
    pub fn q_table(&self) -> Matrix<T> {
        let n = self.features.rows() / self.n_actions;
        Matrix::from_fn(n, self.n_actions, |s, a| self.q(s, a))
    }

    /// Sets ω, projecting onto the radius-R ball. Returns the pre-projection norm.
    pub fn set_weights(&mut self, w: Vec<T>) -> Result<T> {
        check_dim("critic weights", self.dim(), w.len())?;
        let norm = norm_l2(&w);
        self.weights = if norm > self.radius {
            let k = self.radius / norm;
            w.into_iter().map(|x| x * k).collect()
        } else {
            w
        };
        Ok(norm)
    }
}

/// Outcome of one critic update.
#[derive(Debug, Clone)]
pub struct CriticUpdate<T: Scalar> {
    pub critic: CriticModel<T>,
    pub pre_projection_norm: T,
    /// Smallest eigenvalue of the (regularized) Gram matrix that was solved.
    pub min_singular: f64,
    /// Diagonal added to the Gram matrix (zero in exact mode).
    pub ridge: T,
}

/// Settings shared by both critic modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticTarget {
    /// Rollout length `m`.
    pub m: usize,
    /// Scale the discounted reward sum by `1 − γ` as printed in the update rule.
    pub normalized_return: bool,
}

impl CriticTarget {
    fn reward_scale<T: Scalar>(&self, gamma: T) -> T {
        if self.normalized_return {
            T::one() - gamma
        } else {
            T::one()
        }
    }
}

/// `c Σ_{i<m} γ^i P_π^i r + γ^m P_π^m Q` on the state-action chain, `c ∈ {1−γ, 1}`.
pub fn m_step_target<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    q: &Matrix<T>,
    target: CriticTarget,
) -> Matrix<T> {
    let g = mdp.gamma();
    let c = target.reward_scale(g);
    let mut x = q.clone();
    for _ in 0..target.m {
        let v: Vec<T> = (0..mdp.n_states()).map(|s| dot(policy.row(s), x.row(s))).collect();
        let next = Matrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
            c * mdp.reward(s, a) + g * dot(mdp.transition_row(s, a), &v)
        });
        if next == x {
            break;
        }
        x = next;
    }
    x
}

fn solve_gram<T: Scalar>(gram: &Matrix<T>, rhs: &[T]) -> Result<(Vec<T>, f64)> {
    let min_singular = smallest_symmetric_eigenvalue(gram);
    let lu = Lu::factor_checked(gram, "critic Gram").map_err(|_| Error::SingularGram { min_singular })?;
    Ok((lu.solve(rhs), min_singular))
}

fn smallest_symmetric_eigenvalue<T: Scalar>(m: &Matrix<T>) -> f64 {
    m.to_f64()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Exact mode: weighted least squares under `ρ^π` against the m-step target.
pub fn critic_update_exact<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    critic: &CriticModel<T>,
    target: CriticTarget,
) -> Result<CriticUpdate<T>> {
    check_dim("critic pairs", mdp.n_states() * mdp.n_actions(), critic.n_pairs())?;
    let y = m_step_target(mdp, policy, &critic.q_table(), target);
    fit_weighted(mdp, policy, critic, &y)
}

/// Projected `argmin_ω Σ ρ^π(s,a) (y(s,a) − ωᵀφ(s,a))²`.
pub fn fit_weighted<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &StochasticPolicy<T>,
    critic: &CriticModel<T>,
    y: &Matrix<T>,
) -> Result<CriticUpdate<T>> {
    check_dim("critic pairs", mdp.n_states() * mdp.n_actions(), critic.n_pairs())?;
    let rho = stationary_analysis(mdp, policy)?.state_action_dist;
    let d = critic.dim();
    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![T::zero(); d];
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let w = rho[(s, a)];
            if w == T::zero() {
                continue;
            }
            accumulate(&mut gram, &mut rhs, critic.phi(s, a), w, y[(s, a)]);
        }
    }
    let (w, min_singular) = solve_gram(&gram, &rhs)?;
    let mut out = critic.clone();
    let pre = out.set_weights(w)?;
    Ok(CriticUpdate {
        critic: out,
        pre_projection_norm: pre,
        min_singular,
        ridge: T::zero(),
    })
}

fn accumulate<T: Scalar>(gram: &mut Matrix<T>, rhs: &mut [T], phi: &[T], w: T, y: T) {
    for (i, &pi) in phi.iter().enumerate() {
        if pi == T::zero() {
            continue;
        }
        rhs[i] += w * pi * y;
        for (g, &pj) in gram.row_mut(i).iter_mut().zip(phi) {
            *g += w * pi * pj;
        }
    }
}

/// Sampled mode: plug-in least squares over the batch. Trajectory `l` starts
/// at pair `l`, and its m-step return is regressed on that pair's features.
pub fn critic_update_sampled<T: Scalar>(
    mdp: &Mdp<T>,
    batch: &SampleBatch<T>,
    critic: &CriticModel<T>,
    target: CriticTarget,
) -> Result<CriticUpdate<T>> {
    let n = batch.pairs.len();
    if n == 0 {
        return Err(Error::config("sampled critic update needs at least one sample"));
    }
    let g = mdp.gamma();
    let c = target.reward_scale(g);
    let d = critic.dim();
    let inv_n = T::one() / T::from_usize_lossy(n);
    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![T::zero(); d];
    for (&(s, a), traj) in batch.pairs.iter().zip(&batch.trajectories) {
        let m = traj.len() - 1;
        let mut ret = T::zero();
        let mut disc = T::one();
        for i in 0..m {
            ret += disc * traj.rewards[i];
            disc *= g;
        }
        let y = c * ret + disc * critic.q(traj.states[m], traj.actions[m]);
        accumulate(&mut gram, &mut rhs, critic.phi(s, a), inv_n, y);
    }
    let ridge = T::lit(SAMPLED_RIDGE);
    for i in 0..d {
        gram[(i, i)] += ridge;
    }
    let (w, min_singular) = solve_gram(&gram, &rhs)?;
    let mut out = critic.clone();
    let pre = out.set_weights(w)?;
    Ok(CriticUpdate {
        critic: out,
        pre_projection_norm: pre,
        min_singular,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_q, random_mdp};

    fn two_state() -> Mdp<f64> {
        random_mdp(2, 2, 0.9, 0)
    }

    #[test]
    fn projection_rescales() {
        let mut c = CriticModel::<f64>::one_hot(1, 2, 1.0).unwrap();
        let pre = c.set_weights(vec![1.2, 1.6]).unwrap();
        assert!((pre - 2.0).abs() < 1e-15);
        assert!((norm_l2(c.weights()) - 1.0).abs() < 1e-15);
        assert!((c.weights()[0] / c.weights()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn features_must_be_bounded() {
        let phi = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(CriticModel::new(phi, 1, 1.0).is_err());
        let c = CriticModel::<f64>::random_features(3, 2, 4, 5.0, &mut crate::rng::stream(0, 0)).unwrap();
        assert_eq!(c.dim(), 4);
    }

    #[test]
    fn exact_m1_solves_weighted_normal_equations() {
        let mdp = two_state();
        let pol = StochasticPolicy::new(Matrix::from_rows(&[vec![0.4, 0.6], vec![0.7, 0.3]]).unwrap()).unwrap();
        let mut critic = CriticModel::one_hot(2, 2, 1e6).unwrap();
        critic.set_weights(vec![0.5, -0.2, 1.0, 0.3]).unwrap();
        let tgt = CriticTarget {
            m: 1,
            normalized_return: true,
        };
        let out = critic_update_exact(&mdp, &pol, &critic, tgt).unwrap();

        // Hand assembly: D = diag(ρ), Φ = I, so ω = (ΦᵀDΦ)⁻¹ΦᵀD y = y.
        let rho = stationary_analysis(&mdp, &pol).unwrap().state_action_dist;
        let mut gram = Matrix::zeros(4, 4);
        let mut rhs = vec![0.0; 4];
        for s in 0..2 {
            let v_next: Vec<f64> = (0..2)
                .map(|t| (0..2).map(|b| pol.prob(t, b) * critic.q(t, b)).sum())
                .collect();
            for a in 0..2 {
                let i = 2 * s + a;
                let y = 0.1 * mdp.reward(s, a) + 0.9 * (0..2).map(|t| mdp.transition(s, a, t) * v_next[t]).sum::<f64>();
                gram[(i, i)] = rho[(s, a)];
                rhs[i] = rho[(s, a)] * y;
            }
        }
        let want = Lu::factor(&gram).unwrap().solve(&rhs);
        for (a, b) in out.critic.weights().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn long_rollout_limits() {
        let mdp = random_mdp::<f64>(3, 2, 0.9, 7);
        let pol = StochasticPolicy::<f64>::uniform(3, 2);
        let mut critic = CriticModel::one_hot(3, 2, 1e6).unwrap();
        critic.set_weights(vec![0.3; 6]).unwrap();
        let qpi = policy_q(&mdp, &pol).unwrap();

        // Oracle: power-iterate the update map on the table directly.
        let mut oracle = critic.q_table();
        for _ in 0..512 {
            let v: Vec<f64> = (0..3).map(|s| (0..2).map(|a| 0.5 * oracle[(s, a)]).sum()).collect();
            oracle = Matrix::from_fn(3, 2, |s, a| {
                0.1 * mdp.reward(s, a) + 0.9 * (0..3).map(|t| mdp.transition(s, a, t) * v[t]).sum::<f64>()
            });
        }
        let norm = critic_update_exact(
            &mdp,
            &pol,
            &critic,
            CriticTarget {
                m: 512,
                normalized_return: true,
            },
        )
        .unwrap();
        let q = norm.critic.q_table();
        for s in 0..3 {
            for a in 0..2 {
                assert!((q[(s, a)] - oracle[(s, a)]).abs() < 1e-6);
                assert!((q[(s, a)] - 0.1 * qpi[(s, a)]).abs() < 1e-6);
            }
        }
        let plain = critic_update_exact(
            &mdp,
            &pol,
            &critic,
            CriticTarget {
                m: 512,
                normalized_return: false,
            },
        )
        .unwrap();
        let q = plain.critic.q_table();
        for s in 0..3 {
            for a in 0..2 {
                assert!((q[(s, a)] - qpi[(s, a)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn deterministic_policy_gram_is_singular() {
        let mdp = two_state();
        let pol = crate::mdp::DeterministicPolicy::constant(2, 0).to_stochastic::<f64>(2);
        let critic = CriticModel::one_hot(2, 2, 10.0).unwrap();
        let err = critic_update_exact(
            &mdp,
            &pol,
            &critic,
            CriticTarget {
                m: 1,
                normalized_return: true,
            },
        );
        assert!(matches!(err, Err(Error::SingularGram { .. })));
    }
}
