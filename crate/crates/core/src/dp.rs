//! Ground-truth solvers: value iteration, policy iteration and the Newton
//! step whose equivalence with policy iteration underpins the analysis.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm_sup, sub_vec, Lu, Matrix};
use crate::mdp::{bellman_optimal, induce_policy_matrices, policy_value, DeterministicPolicy, Mdp};
use crate::scalar::Scalar;

pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolveResult<T: Scalar> {
    pub v_star: Vec<T>,
    pub pi_star: DeterministicPolicy,
    pub iterations: usize,
    /// `‖T v − v‖_∞` at the returned value.
    pub residual: T,
    pub converged: bool,
}

/// Iterates `v ← T v` from zero until `‖T v − v‖_∞ ≤ tol`.
pub fn value_iteration<T: Scalar>(mdp: &Mdp<T>, tol: T, max_iter: usize) -> Result<SolveResult<T>> {
    if !(tol > T::zero()) {
        return Err(Error::config("value iteration tolerance must be positive"));
    }
    let mut v = vec![T::zero(); mdp.n_states()];
    let mut iterations = 0;
    loop {
        let (tv, pi) = bellman_optimal(mdp, &v)?;
        let residual = norm_sup(&sub_vec(&tv, &v));
        if residual <= tol || iterations >= max_iter {
            return Ok(SolveResult {
                v_star: v,
                pi_star: pi,
                iterations,
                residual,
                converged: residual <= tol,
            });
        }
        v = tv;
        iterations += 1;
    }
}

/// One evaluate-then-improve step: returns `(greedy(v^π), v^π)`.
pub fn policy_iteration_step<T: Scalar>(
    mdp: &Mdp<T>,
    pi: &DeterministicPolicy,
) -> Result<(DeterministicPolicy, Vec<T>)> {
    let v = policy_value(mdp, pi)?;
    let (_, next) = bellman_optimal(mdp, &v)?;
    Ok((next, v))
}

/// Exact policy iteration from `pi0` until the greedy policy repeats.
pub fn policy_iteration<T: Scalar>(mdp: &Mdp<T>, pi0: &DeterministicPolicy, max_iter: usize) -> Result<SolveResult<T>> {
    let mut pi = pi0.clone();
    for it in 1..=max_iter {
        let (next, v) = policy_iteration_step(mdp, &pi)?;
        if next == pi {
            let (tv, _) = bellman_optimal(mdp, &v)?;
            return Ok(SolveResult {
                residual: norm_sup(&sub_vec(&tv, &v)),
                v_star: v,
                pi_star: pi,
                iterations: it,
                converged: true,
            });
        }
        pi = next;
    }
    let v = policy_value(mdp, &pi)?;
    let (tv, _) = bellman_optimal(mdp, &v)?;
    Ok(SolveResult {
        residual: norm_sup(&sub_vec(&tv, &v)),
        v_star: v,
        pi_star: pi,
        iterations: max_iter,
        converged: false,
    })
}

/// Oracle `v*`: policy iteration from the all-zeros policy, whose values come
/// from direct solves and so carry no iteration truncation error.
pub fn solve_optimal<T: Scalar>(mdp: &Mdp<T>) -> Result<SolveResult<T>> {
    let cap = mdp.n_states() * mdp.n_actions() + 1;
    let res = policy_iteration(mdp, &DeterministicPolicy::constant(mdp.n_states(), 0), cap)?;
    if !res.converged {
        return Err(Error::IllConditioned {
            context: "policy iteration did not stabilize",
            condition: f64::NAN,
        });
    }
    Ok(res)
}

/// Newton step on `F(v) = v − T v`: `v − J_v⁻¹ (v − T v)` with `J_v = I − γ P_{π(v)}`.
pub fn newton_step<T: Scalar>(mdp: &Mdp<T>, v: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
    check_dim("value vector", mdp.n_states(), v.len())?;
    let (tv, pi) = bellman_optimal(mdp, v)?;
    let jac = induce_policy_matrices(mdp, &pi)?.jacobian(mdp.gamma());
    let lu = Lu::factor_checked(&jac, "newton_step")?;
    let step = lu.solve(&sub_vec(v, &tv));
    Ok((sub_vec(v, &step), jac))
}
