use crate::error::{check_dim, Result};
use crate::linalg::{dot, Lu, Matrix};
use crate::scalar::Scalar;

use super::{DeterministicPolicy, Mdp, Policy};

/// `(P_π, r_π)` for a fixed policy, plus a compressed row form used when the
/// evaluation operator is applied many times.
#[derive(Debug, Clone)]
pub struct PolicyMatrices<T: Scalar> {
    pub p: Matrix<T>,
    pub r: Vec<T>,
    support: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> PolicyMatrices<T> {
    /// `T^π v = r_π + γ P_π v`.
    pub fn apply(&self, gamma: T, v: &[T]) -> Vec<T> {
        self.support
            .iter()
            .zip(&self.r)
            .map(|(row, &r)| r + gamma * row.iter().map(|&(j, p)| p * v[j]).sum::<T>())
            .collect()
    }

    /// `(T^π)^m v`, stopping early once an application leaves `v` bitwise unchanged.
    pub fn apply_n(&self, gamma: T, v: &[T], m: usize) -> Vec<T> {
        let mut cur = v.to_vec();
        for _ in 0..m {
            let next = self.apply(gamma, &cur);
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }

    /// `I − γ P_π`.
    pub fn jacobian(&self, gamma: T) -> Matrix<T> {
        Matrix::identity(self.p.rows()).sub(&self.p.scale(gamma))
    }
}

pub fn induce_policy_matrices<T: Scalar, P: Policy<T>>(mdp: &Mdp<T>, policy: &P) -> Result<PolicyMatrices<T>> {
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    check_dim("policy states", n, policy.n_states())?;
    policy.check_actions(na)?;
    let mut p = Matrix::zeros(n, n);
    let mut r = vec![T::zero(); n];
    for (s, rs) in r.iter_mut().enumerate() {
        policy.for_each_action(s, na, |a, w| {
            *rs += w * mdp.reward(s, a);
            for (dst, &t) in p.row_mut(s).iter_mut().zip(mdp.transition_row(s, a)) {
                *dst += w * t;
            }
        });
    }
    let support = (0..n)
        .map(|s| {
            p.row(s)
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != T::zero())
                .map(|(j, &x)| (j, x))
                .collect()
        })
        .collect();
    Ok(PolicyMatrices { p, r, support })
}

pub fn bellman_eval<T: Scalar, P: Policy<T>>(mdp: &Mdp<T>, policy: &P, v: &[T]) -> Result<Vec<T>> {
    check_dim("value vector", mdp.n_states(), v.len())?;
    Ok(induce_policy_matrices(mdp, policy)?.apply(mdp.gamma(), v))
}

/// `Q(s,a) = r(s,a) + γ Σ_{s'} P(s'|s,a) v(s')`.
pub fn q_from_values<T: Scalar>(mdp: &Mdp<T>, v: &[T]) -> Result<Matrix<T>> {
    check_dim("value vector", mdp.n_states(), v.len())?;
    let g = mdp.gamma();
    Ok(Matrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        mdp.reward(s, a) + g * dot(mdp.transition_row(s, a), v)
    }))
}

/// Lowest action whose value is within the tie tolerance of the maximum, so
/// that rounding differences between solvers cannot flip exact ties.
fn argmax_row<T: Scalar>(row: &[T]) -> usize {
    let top = row.iter().copied().fold(T::neg_infinity(), T::max);
    let tol = T::lit(T::TIE_TOL) * top.abs().max(T::one());
    row.iter().position(|&q| q >= top - tol).unwrap_or(0)
}

/// `T v` and the greedy policy attaining it (ties to the lowest action index).
///
/// The returned value is `T^π v` for the returned policy, which differs from
/// the exact maximum by at most the tie tolerance.
pub fn bellman_optimal<T: Scalar>(mdp: &Mdp<T>, v: &[T]) -> Result<(Vec<T>, DeterministicPolicy)> {
    let q = q_from_values(mdp, v)?;
    let actions: Vec<usize> = (0..q.rows()).map(|s| argmax_row(q.row(s))).collect();
    let tv = actions.iter().enumerate().map(|(s, &a)| q[(s, a)]).collect();
    Ok((tv, DeterministicPolicy::new(actions, mdp.n_actions())?))
}

pub fn greedy<T: Scalar>(mdp: &Mdp<T>, v: &[T]) -> Result<DeterministicPolicy> {
    Ok(bellman_optimal(mdp, v)?.1)
}

/// `v^π = (I − γ P_π)⁻¹ r_π` by LU with one step of iterative refinement.
pub fn policy_value<T: Scalar, P: Policy<T>>(mdp: &Mdp<T>, policy: &P) -> Result<Vec<T>> {
    let pm = induce_policy_matrices(mdp, policy)?;
    let j = pm.jacobian(mdp.gamma());
    let lu = Lu::factor_checked(&j, "policy_value")?;
    let mut v = lu.solve(&pm.r);
    let jv = j.mul_vec(&v);
    let resid: Vec<T> = pm.r.iter().zip(&jv).map(|(&r, &x)| r - x).collect();
    for (vi, di) in v.iter_mut().zip(lu.solve(&resid)) {
        *vi += di;
    }
    Ok(v)
}

/// `Q^π` via Eq. (1): `Q^π = r + γ P v^π`.
pub fn policy_q<T: Scalar, P: Policy<T>>(mdp: &Mdp<T>, policy: &P) -> Result<Matrix<T>> {
    let v = policy_value(mdp, policy)?;
    q_from_values(mdp, &v)
}
