use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::linalg::{Lu, Matrix};
use crate::scalar::Scalar;

use super::{induce_policy_matrices, Mdp, Policy};

/// Chains with a spectral gap at or below this are flagged degenerate.
pub const GAP_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainStatus {
    Ergodic,
    /// Reducible or periodic within tolerance; the distribution is then a
    /// Cesàro average from the uniform start and not unique.
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StationaryAnalysis<T: Scalar> {
    pub state_dist: Vec<T>,
    pub state_action_dist: Matrix<T>,
    /// Second-largest eigenvalue modulus `|λ₂|`.
    pub lambda2_modulus: f64,
    /// Largest real part among the non-unit eigenvalues.
    pub lambda_r: f64,
    /// `1 − |λ₂|`.
    pub spectral_gap: f64,
    pub status: ChainStatus,
}

/// Stationary distribution and spectral summary of a row-stochastic matrix.
pub fn stationary_of_chain<T: Scalar>(p: &Matrix<T>) -> Result<(Vec<T>, f64, f64, ChainStatus)> {
    check_dim("chain", p.rows(), p.cols())?;
    let n = p.rows();
    let moduli = p.eigen_moduli();
    let reals = p.eigen_real_parts();
    let lambda2 = moduli.get(1).copied().unwrap_or(0.0);
    let lambda_r = reals.get(1).copied().unwrap_or(0.0);
    let mut status = if 1.0 - lambda2 <= GAP_FLOOR {
        ChainStatus::Degenerate
    } else {
        ChainStatus::Ergodic
    };

    // dᵀ (I − P) = 0 with Σ d = 1: transpose and swap the last equation for the normalization.
    let mut a = Matrix::identity(n).sub(p).transpose();
    for j in 0..n {
        a[(n - 1, j)] = T::one();
    }
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    let solved = match Lu::factor_checked(&a, "stationary distribution") {
        Ok(lu) if status == ChainStatus::Ergodic => Some(lu.solve(&rhs)),
        _ => None,
    };
    let dist = match solved {
        Some(d) => d,
        None => {
            status = ChainStatus::Degenerate;
            cesaro_average(p, 10_000)
        }
    };
    Ok((dist, lambda2, lambda_r, status))
}

fn cesaro_average<T: Scalar>(p: &Matrix<T>, steps: usize) -> Vec<T> {
    let n = p.rows();
    let mut x = vec![T::one() / T::from_usize_lossy(n); n];
    let mut acc = x.clone();
    for _ in 1..steps {
        x = p.vec_mul(&x);
        for (a, &xi) in acc.iter_mut().zip(&x) {
            *a += xi;
        }
    }
    let k = T::from_usize_lossy(steps);
    acc.into_iter().map(|a| a / k).collect()
}

pub fn stationary_analysis<T: Scalar, P: Policy<T>>(mdp: &Mdp<T>, policy: &P) -> Result<StationaryAnalysis<T>> {
    let pm = induce_policy_matrices(mdp, policy)?;
    let (d, lambda2, lambda_r, status) = stationary_of_chain(&pm.p)?;
    let mut rho = Matrix::zeros(mdp.n_states(), mdp.n_actions());
    for (s, &ds) in d.iter().enumerate() {
        policy.for_each_action(s, mdp.n_actions(), |a, w| rho[(s, a)] = ds * w);
    }
    Ok(StationaryAnalysis {
        state_dist: d,
        state_action_dist: rho,
        lambda2_modulus: lambda2,
        lambda_r,
        spectral_gap: 1.0 - lambda2,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_mdp, StochasticPolicy};
    use approx::assert_relative_eq;

    fn chain(rows: &[Vec<f64>]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn rank_one_chain() {
        let (d, l2, _, st) = stationary_of_chain(&chain(&[vec![0.5, 0.5], vec![0.5, 0.5]])).unwrap();
        assert_relative_eq!(d[0], 0.5, epsilon = 1e-12);
        assert!(l2.abs() < 1e-12);
        assert_eq!(st, ChainStatus::Ergodic);
    }

    #[test]
    fn two_state_closed_form() {
        let (d, l2, lr, _) = stationary_of_chain(&chain(&[vec![0.9, 0.1], vec![0.2, 0.8]])).unwrap();
        assert_relative_eq!(d[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(d[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(l2, 0.7, epsilon = 1e-12);
        assert_relative_eq!(lr, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn identity_is_flagged() {
        let (_, _, _, st) = stationary_of_chain(&chain(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert_eq!(st, ChainStatus::Degenerate);
        let (_, _, _, st) = stationary_of_chain(&chain(&[vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert_eq!(st, ChainStatus::Degenerate);
    }

    #[test]
    fn left_eigenvector_and_occupancy() {
        let mdp = random_mdp::<f64>(7, 3, 0.9, 2);
        let pol = StochasticPolicy::<f64>::uniform(7, 3);
        let sa = stationary_analysis(&mdp, &pol).unwrap();
        let pm = induce_policy_matrices(&mdp, &pol).unwrap();
        let dp = pm.p.vec_mul(&sa.state_dist);
        for (x, y) in dp.iter().zip(&sa.state_dist) {
            assert!((x - y).abs() <= 1e-9);
            assert!(*y >= -1e-12);
        }
        for s in 0..7 {
            for a in 0..3 {
                assert_relative_eq!(sa.state_action_dist[(s, a)], sa.state_dist[s] / 3.0, epsilon = 1e-15);
            }
        }
        assert!(sa.spectral_gap > 0.0);
    }
}
