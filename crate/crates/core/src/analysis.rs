//! Perturbation decomposition of actor-critic updates and cross-seed
//! bias/noise estimation. All quantities come from oracle solves.

use serde::{Deserialize, Serialize};

use crate::ac::AcTrace;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{add_vec, sub_vec, Lu, Matrix};
use crate::mdp::{bellman_optimal, induce_policy_matrices, policy_value, Mdp, StochasticPolicy};
use crate::scalar::Scalar;

/// Components of one perturbed Newton step, named after the paper's symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ErrorDecomposition<T: Scalar> {
    /// `T̃(v_t) − T(v_t)`.
    pub e_t: Vec<T>,
    /// `J̃⁻¹ − J⁻¹`.
    pub e_j: Matrix<T>,
    /// `−e_J (v_t − T v_t) + (J⁻¹ + e_J) e_T`.
    pub e_c: Vec<T>,
    /// `v^{π̂} − v^{π̃}` (equal to `e_v`).
    pub e_a: Vec<T>,
    pub e_v: Vec<T>,
    /// `r_{π̃} − r_{π̂}`.
    pub e_r: Vec<T>,
    /// `P_{π̃} − P_{π̂}`.
    pub e_p: Matrix<T>,
    /// `J̃⁻¹ − Ĵ⁻¹`.
    pub e_jhat: Matrix<T>,
    /// `e_c + e_a`, which equals `v^{π̂} − v^{greedy(v_t)}`.
    pub e_total: Vec<T>,
    /// The displayed closed form
    /// `e_v + e_Ĵ (b − (r_{π̃} + γ P_{π̃} b)) − Ĵ⁻¹ (e_r + γ e_P a)` with `a = v_t`, `b = v^{π̂}`.
    /// It does not reduce to `e_total` in general and is kept for comparison.
    pub e_total_printed: Vec<T>,
    /// `v_t = v^{π_t}`.
    pub v_t: Vec<T>,
    /// `v^{π_{t+1}}` for the exact greedy `π_{t+1}` of `v_t`.
    pub v_newton: Vec<T>,
    /// `v^{π̂}`.
    pub v_hat: Vec<T>,
}

fn inverse<T: Scalar>(m: &Matrix<T>, context: &'static str) -> Result<Matrix<T>> {
    Ok(Lu::factor_checked(m, context)?.inverse())
}

/// Decomposes the step `π_t → π̂` given the critic-induced policy `π̃`.
pub fn decompose_perturbation<T: Scalar>(
    mdp: &Mdp<T>,
    pi_t: &StochasticPolicy<T>,
    pi_tilde: &StochasticPolicy<T>,
    pi_hat: &StochasticPolicy<T>,
) -> Result<ErrorDecomposition<T>> {
    let g = mdp.gamma();
    let v_t = policy_value(mdp, pi_t)?;
    let (tv, pi_next) = bellman_optimal(mdp, &v_t)?;
    let pm_next = induce_policy_matrices(mdp, &pi_next)?;
    let pm_tilde = induce_policy_matrices(mdp, pi_tilde)?;
    let pm_hat = induce_policy_matrices(mdp, pi_hat)?;

    let j_inv = inverse(&pm_next.jacobian(g), "J")?;
    let jt_inv = inverse(&pm_tilde.jacobian(g), "J tilde")?;
    let jh_inv = inverse(&pm_hat.jacobian(g), "J hat")?;

    let e_t = sub_vec(&pm_tilde.apply(g, &v_t), &tv);
    let e_j = jt_inv.sub(&j_inv);
    let resid = sub_vec(&v_t, &tv);
    let e_c = add_vec(
        &e_j.mul_vec(&resid).iter().map(|&x| -x).collect::<Vec<_>>(),
        &jt_inv.mul_vec(&e_t),
    );

    let v_tilde = policy_value(mdp, pi_tilde)?;
    let v_hat = policy_value(mdp, pi_hat)?;
    let v_newton = policy_value(mdp, &pi_next)?;
    let e_v = sub_vec(&v_hat, &v_tilde);
    let e_r = sub_vec(&pm_tilde.r, &pm_hat.r);
    let e_p = pm_tilde.p.sub(&pm_hat.p);
    let e_jhat = jt_inv.sub(&jh_inv);

    let b_resid = sub_vec(&v_hat, &pm_tilde.apply(g, &v_hat));
    let inner = add_vec(&e_r, &e_p.mul_vec(&v_t).iter().map(|&x| g * x).collect::<Vec<_>>());
    let e_total_printed = sub_vec(&add_vec(&e_v, &e_jhat.mul_vec(&b_resid)), &jh_inv.mul_vec(&inner));

    Ok(ErrorDecomposition {
        e_total: add_vec(&e_c, &e_v),
        e_t,
        e_j,
        e_c,
        e_a: e_v.clone(),
        e_v,
        e_r,
        e_p,
        e_jhat,
        e_total_printed,
        v_t,
        v_newton,
        v_hat,
    })
}

/// `E_t = Ĵ⁻¹(a − T a) − (a − b)` with `a = v^{π̂_t}`, `b = v^{π̂_{t+1}}`,
/// under both Jacobian conventions used in the text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NewtonResidual<T: Scalar> {
    /// `Ĵ = I − γ P_{greedy(a)}`, the Newton-step Jacobian.
    pub greedy_jacobian: Vec<T>,
    /// `Ĵ = I − γ P_{π̂_{t+1}}`.
    pub executed_jacobian: Vec<T>,
}

pub fn newton_residual<T: Scalar>(mdp: &Mdp<T>, trace: &AcTrace<T>, t: usize) -> Result<NewtonResidual<T>> {
    if t + 1 >= trace.records.len() {
        return Err(Error::config(format!(
            "residual index {t} needs record {} but the trace has {}",
            t + 1,
            trace.records.len()
        )));
    }
    let a = &trace.records[t].policy_values;
    let b = &trace.records[t + 1].policy_values;
    check_dim("trace values", mdp.n_states(), a.len())?;
    let g = mdp.gamma();
    let (ta, pi_greedy) = bellman_optimal(mdp, a)?;
    let step = sub_vec(a, &ta);
    let drift = sub_vec(a, b);
    let j_greedy = induce_policy_matrices(mdp, &pi_greedy)?.jacobian(g);
    let j_exec = induce_policy_matrices(mdp, &trace.records[t + 1].executed_policy)?.jacobian(g);
    let greedy = Lu::factor_checked(&j_greedy, "newton_residual")?.solve(&step);
    let exec = Lu::factor_checked(&j_exec, "newton_residual")?.solve(&step);
    Ok(NewtonResidual {
        greedy_jacobian: sub_vec(&greedy, &drift),
        executed_jacobian: sub_vec(&exec, &drift),
    })
}

/// Cross-seed estimate of `B(t) = E[E_t]` and the size of `N(t) = E_t − B(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BiasEstimate<T: Scalar> {
    pub bias_hat: Vec<T>,
    /// Trace of the per-coordinate sample covariance (ddof 1); `None` for one seed.
    pub noise_cov_trace: Option<T>,
    pub n_seeds: usize,
    /// `3 σ̂_i / √K`; zero when the noise is not estimable.
    pub ci_halfwidth: Vec<T>,
}

/// Per-coordinate values are sorted before summation, so the result does not
/// depend on the order of the seeds.
pub fn estimate_bias<T: Scalar>(residuals: &[Vec<T>], allow_single: bool) -> Result<BiasEstimate<T>> {
    let k = residuals.len();
    if k == 0 || (k < 2 && !allow_single) {
        return Err(Error::config(format!(
            "bias/noise estimation needs at least 2 seeds, got {k}"
        )));
    }
    let n = residuals[0].len();
    for r in residuals {
        check_dim("residual length", n, r.len())?;
    }
    let kt = T::from_usize_lossy(k);
    let mut bias = Vec::with_capacity(n);
    let mut ci = Vec::with_capacity(n);
    let mut trace = T::zero();
    for i in 0..n {
        let mut col: Vec<T> = residuals.iter().map(|r| r[i]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mean = col.iter().copied().sum::<T>() / kt;
        bias.push(mean);
        if k >= 2 {
            let mut dev: Vec<T> = col.iter().map(|&x| (x - mean) * (x - mean)).collect();
            dev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let var = dev.into_iter().sum::<T>() / (kt - T::one());
            trace += var;
            ci.push(T::lit(3.0) * var.sqrt() / kt.sqrt());
        } else {
            ci.push(T::zero());
        }
    }
    Ok(BiasEstimate {
        bias_hat: bias,
        noise_cov_trace: (k >= 2).then_some(trace),
        n_seeds: k,
        ci_halfwidth: ci,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ac::{perturb_policy, run_ac, AcConfig, CriticNoise, ErrorSpec, WarmStart};
    use crate::linalg::norm_sup;
    use crate::mdp::{greedy, random_mdp, DeterministicPolicy};
    use crate::rng;
    use rand::Rng;

    fn det(mdp: &Mdp<f64>, seed: u64) -> DeterministicPolicy {
        DeterministicPolicy::random(mdp.n_states(), mdp.n_actions(), &mut rng::stream(seed, 30))
    }

    #[test]
    fn no_actor_error_zeroes_actor_terms() {
        let mdp = random_mdp::<f64>(5, 3, 0.9, 0);
        let pi_t = det(&mdp, 1).to_stochastic(3);
        let tilde = det(&mdp, 2).to_stochastic(3);
        let d = decompose_perturbation(&mdp, &pi_t, &tilde, &tilde).unwrap();
        assert!(norm_sup(&d.e_v) == 0.0 && norm_sup(&d.e_r) == 0.0);
        assert!(d.e_p.max_abs() == 0.0 && d.e_jhat.max_abs() == 0.0);
    }

    #[test]
    fn exact_critic_zeroes_critic_terms() {
        let mdp = random_mdp::<f64>(5, 3, 0.9, 1);
        let pi_t = det(&mdp, 3);
        let v = policy_value(&mdp, &pi_t).unwrap();
        let tilde = greedy(&mdp, &v).unwrap().to_stochastic(3);
        let d = decompose_perturbation(&mdp, &pi_t.to_stochastic(3), &tilde, &tilde).unwrap();
        assert!(norm_sup(&d.e_t) == 0.0);
        assert!(d.e_j.max_abs() == 0.0);
        assert!(norm_sup(&d.e_c) == 0.0);
    }

    #[test]
    fn identity_on_perturbed_instances() {
        for seed in 0..20 {
            let mdp = random_mdp::<f64>(6, 3, 0.9, seed);
            let pi_t = det(&mdp, seed + 100).to_stochastic(3);
            let tilde = det(&mdp, seed + 200);
            let hat = perturb_policy(&tilde, 0.8, 3).unwrap();
            let d = decompose_perturbation(&mdp, &pi_t, &tilde.to_stochastic(3), &hat).unwrap();
            let recon = add_vec(&add_vec(&d.v_newton, &d.e_c), &d.e_a);
            assert!(norm_sup(&sub_vec(&recon, &d.v_hat)) < 1e-8);
        }
    }

    #[test]
    fn residual_matches_components_on_noisy_run() {
        let mdp = random_mdp::<f64>(6, 3, 0.9, 0);
        let errors = ErrorSpec {
            critic_noise: CriticNoise {
                bias: 0.3,
                half_width: 1.0,
                mixture: false,
            },
            actor_keep_prob: 0.85,
        };
        let cfg = AcConfig {
            m: 3,
            ..AcConfig::default()
        };
        let trace = run_ac(&mdp, &WarmStart::Policy(det(&mdp, 0)), &cfg, &errors, 6, 0).unwrap();
        for t in 0..6 {
            let r = newton_residual(&mdp, &trace, t).unwrap();
            let next = &trace.records[t + 1];
            let tilde = next.greedy_policy.as_ref().unwrap().to_stochastic(3);
            let d =
                decompose_perturbation(&mdp, &trace.records[t].executed_policy, &tilde, &next.executed_policy).unwrap();
            assert!(norm_sup(&sub_vec(&r.greedy_jacobian, &d.e_total)) < 1e-8);
        }
        assert!(newton_residual(&mdp, &trace, 6).unwrap_err().is_config());
    }

    #[test]
    fn exact_pi_trace_has_zero_residual() {
        let mdp = random_mdp::<f64>(6, 3, 0.9, 4);
        let trace = run_ac(
            &mdp,
            &WarmStart::Policy(det(&mdp, 4)),
            &AcConfig::default(),
            &ErrorSpec::none(),
            5,
            0,
        )
        .unwrap();
        for t in 0..5 {
            let r = newton_residual(&mdp, &trace, t).unwrap();
            assert!(norm_sup(&r.greedy_jacobian) < 1e-8);
        }
        let single = Mdp::new(vec![vec![vec![1.0]]], vec![vec![1.0]], 0.9, vec![1.0]).unwrap();
        let trace = run_ac(
            &single,
            &WarmStart::Policy(DeterministicPolicy::constant(1, 0)),
            &AcConfig::default(),
            &ErrorSpec::none(),
            3,
            0,
        )
        .unwrap();
        for t in 0..3 {
            let r = newton_residual(&single, &trace, t).unwrap();
            assert!(norm_sup(&r.greedy_jacobian) < 1e-8);
            assert!(norm_sup(&r.executed_jacobian) < 1e-8);
        }
    }

    #[test]
    fn bias_of_constant_injection() {
        let res = vec![vec![0.5, -1.0]; 4];
        let b = estimate_bias(&res, false).unwrap();
        assert_eq!(b.bias_hat, vec![0.5, -1.0]);
        assert_eq!(b.noise_cov_trace, Some(0.0));
        assert!(estimate_bias(&res[..1], false).unwrap_err().is_config());
        let one = estimate_bias(&res[..1], true).unwrap();
        assert_eq!(one.noise_cov_trace, None);
    }

    #[test]
    fn zero_mean_noise_within_ci() {
        let mut r = rng::stream(5, 0);
        let res: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..8).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let b = estimate_bias(&res, false).unwrap();
        for (m, c) in b.bias_hat.iter().zip(&b.ci_halfwidth) {
            assert!(m.abs() <= *c);
        }
    }

    #[test]
    fn estimate_is_order_independent() {
        let mut r = rng::stream(6, 0);
        let res: Vec<Vec<f64>> = (0..17)
            .map(|_| (0..3).map(|_| r.random::<f64>() * 1e3).collect())
            .collect();
        let mut rev = res.clone();
        rev.reverse();
        assert_eq!(estimate_bias(&res, false).unwrap(), estimate_bias(&rev, false).unwrap());
    }
}
