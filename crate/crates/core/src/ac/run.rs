use serde::{Deserialize, Serialize};

use crate::dp::solve_optimal;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_l2, norm_sup, sub_vec, Matrix};
use crate::mdp::{greedy, induce_policy_matrices, policy_value, DeterministicPolicy, Mdp, StochasticPolicy};
use crate::rng::{self, streams};
use crate::scalar::Scalar;

use super::actor::{actor_update, ActorParams, ActorSettings};
use super::critic::{critic_update_exact, critic_update_sampled, fit_weighted, CriticModel, CriticTarget};
use super::noise::{inject_value_noise, mix_uniform, perturb_policy, ErrorSpec, NoiseDraw};
use super::sampling::collect_samples;
use super::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `v ← (T^π)^m v` followed by a greedy actor step.
    Tabular,
    /// Sampled linear critic and softmax policy-gradient actor.
    FunctionApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureSpec {
    OneHot,
    Random { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcConfig {
    pub variant: Variant,
    /// Rollout length `m` of the Bellman evaluation / critic target.
    pub m: usize,
    /// Critic sample count `N`.
    pub n_samples: usize,
    /// Actor rollout length `l`.
    pub actor_rollout: usize,
    /// Actor gradient steps `N_a`.
    pub actor_steps: usize,
    /// Actor step size α.
    pub step_size: f64,
    /// Critic projection radius; defaults to `r_max √d / (1 − γ)`.
    pub radius: Option<f64>,
    pub features: FeatureSpec,
    pub critic_mode: Mode,
    pub actor_mode: Mode,
    pub normalized_return: bool,
    pub burn_in: Option<usize>,
    pub temperature: f64,
    /// Logit given to the chosen action when a deterministic policy seeds the softmax actor.
    pub warm_logit: f64,
}

impl Default for AcConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Tabular,
            m: 1000,
            n_samples: 1000,
            actor_rollout: 100,
            actor_steps: 10,
            step_size: 0.1,
            radius: None,
            features: FeatureSpec::OneHot,
            critic_mode: Mode::Sampled,
            actor_mode: Mode::Sampled,
            normalized_return: true,
            burn_in: None,
            temperature: 1.0,
            warm_logit: 2.0,
        }
    }
}

impl AcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("rollout length m must be at least 1"));
        }
        if self.variant == Variant::FunctionApprox {
            if self.n_samples == 0 || self.actor_rollout == 0 {
                return Err(Error::config("N and l must be at least 1"));
            }
            if !(self.step_size > 0.0) {
                return Err(Error::config("actor step size must be positive"));
            }
            if !(self.temperature > 0.0) {
                return Err(Error::config("temperature must be positive"));
            }
            if matches!(self.radius, Some(r) if !(r > 0.0)) {
                return Err(Error::config("critic radius must be positive"));
            }
            if matches!(self.features, FeatureSpec::Random { dim: 0 }) {
                return Err(Error::config("random feature dimension must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum WarmStart<T: Scalar> {
    Policy(DeterministicPolicy),
    Stochastic(StochasticPolicy<T>),
    Actor(ActorParams<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterationRecord<T: Scalar> {
    pub t: usize,
    /// Policy actually executed, `π̂_t`.
    pub executed_policy: StochasticPolicy<T>,
    /// Greedy policy before perturbation, `π̃_t` (tabular variant).
    pub greedy_policy: Option<DeterministicPolicy>,
    /// The learner's value estimate `v(t)`.
    pub critic_values: Vec<T>,
    /// Oracle `v^{π̂_t}`.
    pub policy_values: Vec<T>,
    /// `‖v(t) − v*‖_∞` and `‖v(t) − v*‖₂`.
    pub gap_sup: T,
    pub gap_l2: T,
    /// `‖v^{π̂_t} − v*‖_∞` and `‖v^{π̂_t} − v*‖₂`.
    pub policy_gap_sup: T,
    pub policy_gap_l2: T,
    pub critic_weights: Option<Vec<T>>,
    pub noise: Option<NoiseDraw<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AcTrace<T: Scalar> {
    pub seed: u64,
    pub variant: Variant,
    pub v_star: Vec<T>,
    /// Index 0 is the warm start.
    pub records: Vec<IterationRecord<T>>,
}

impl<T: Scalar> AcTrace<T> {
    pub fn gaps_l2(&self) -> Vec<T> {
        self.records.iter().map(|r| r.gap_l2).collect()
    }

    pub fn policy_gaps_l2(&self) -> Vec<T> {
        self.records.iter().map(|r| r.policy_gap_l2).collect()
    }
}

pub fn run_ac<T: Scalar>(
    mdp: &Mdp<T>,
    warm_start: &WarmStart<T>,
    config: &AcConfig,
    errors: &ErrorSpec<T>,
    iterations: usize,
    seed: u64,
) -> Result<AcTrace<T>> {
    let oracle = solve_optimal(mdp)?;
    run_ac_with_oracle(mdp, &oracle.v_star, warm_start, config, errors, iterations, seed)
}

/// [`run_ac`] with a precomputed `v*`, so sweeps solve the MDP once.
pub fn run_ac_with_oracle<T: Scalar>(
    mdp: &Mdp<T>,
    v_star: &[T],
    warm_start: &WarmStart<T>,
    config: &AcConfig,
    errors: &ErrorSpec<T>,
    iterations: usize,
    seed: u64,
) -> Result<AcTrace<T>> {
    check_dim("v_star", mdp.n_states(), v_star.len())?;
    config.validate()?;
    errors.validate()?;
    let records = match config.variant {
        Variant::Tabular => run_tabular(mdp, v_star, warm_start, config, errors, iterations, seed)?,
        Variant::FunctionApprox => run_function_approx(mdp, v_star, warm_start, config, errors, iterations, seed)?,
    };
    Ok(AcTrace {
        seed,
        variant: config.variant,
        v_star: v_star.to_vec(),
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn make_record<T: Scalar>(
    t: usize,
    v_star: &[T],
    executed_policy: StochasticPolicy<T>,
    greedy_policy: Option<DeterministicPolicy>,
    critic_values: Vec<T>,
    policy_values: Vec<T>,
    critic_weights: Option<Vec<T>>,
    noise: Option<NoiseDraw<T>>,
) -> IterationRecord<T> {
    let dc = sub_vec(&critic_values, v_star);
    let dp = sub_vec(&policy_values, v_star);
    IterationRecord {
        t,
        executed_policy,
        greedy_policy,
        gap_sup: norm_sup(&dc),
        gap_l2: norm_l2(&dc),
        policy_gap_sup: norm_sup(&dp),
        policy_gap_l2: norm_l2(&dp),
        critic_values,
        policy_values,
        critic_weights,
        noise,
    }
}

/// Per iteration: `π̃_t = greedy(v(t−1))`, `π̂_t = perturb(π̃_t, p)`,
/// `v(t) = (T^{π̂_t})^m v(t−1) + e(t)`. The critic starts at `v^{π₀}`.
fn run_tabular<T: Scalar>(
    mdp: &Mdp<T>,
    v_star: &[T],
    warm_start: &WarmStart<T>,
    config: &AcConfig,
    errors: &ErrorSpec<T>,
    iterations: usize,
    seed: u64,
) -> Result<Vec<IterationRecord<T>>> {
    let na = mdp.n_actions();
    let (pi0, det0) = match warm_start {
        WarmStart::Policy(p) => (p.to_stochastic(na), Some(p.clone())),
        WarmStart::Stochastic(p) => (p.clone(), None),
        WarmStart::Actor(a) => {
            let p = a.policy().mode();
            (p.to_stochastic(na), Some(p))
        }
    };
    let mut noise_rng = rng::stream(seed, streams::NOISE);
    let mut v = policy_value(mdp, &pi0)?;
    let mut records = Vec::with_capacity(iterations + 1);
    records.push(make_record(0, v_star, pi0, det0, v.clone(), v.clone(), None, None));
    let noisy = !errors.critic_noise.is_none();
    for t in 1..=iterations {
        let pi_tilde = greedy(mdp, &v)?;
        let pi_hat = perturb_policy(&pi_tilde, errors.actor_keep_prob, na)?;
        let pm = induce_policy_matrices(mdp, &pi_hat)?;
        let mut next = pm.apply_n(mdp.gamma(), &v, config.m);
        let mut draw = None;
        if noisy {
            let (with_noise, d) = inject_value_noise(&next, &errors.critic_noise, &mut noise_rng);
            next = with_noise;
            draw = Some(d);
        }
        v = next;
        let v_pi = policy_value(mdp, &pi_hat)?;
        records.push(make_record(
            t,
            v_star,
            pi_hat,
            Some(pi_tilde),
            v.clone(),
            v_pi,
            None,
            draw,
        ));
    }
    Ok(records)
}

fn critic_state_values<T: Scalar>(critic: &CriticModel<T>, policy: &StochasticPolicy<T>, scale: T) -> Vec<T> {
    let q: Matrix<T> = critic.q_table();
    (0..q.rows()).map(|s| dot(policy.row(s), q.row(s)) / scale).collect()
}

/// Critic noise is added to the weight vector ω, which for one-hot features is
/// the Q-table itself. The critic starts as the weighted least-squares fit of
/// the warm policy's (scaled) Q-function.
fn run_function_approx<T: Scalar>(
    mdp: &Mdp<T>,
    v_star: &[T],
    warm_start: &WarmStart<T>,
    config: &AcConfig,
    errors: &ErrorSpec<T>,
    iterations: usize,
    seed: u64,
) -> Result<Vec<IterationRecord<T>>> {
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let g = mdp.gamma();
    let mut actor = match warm_start {
        WarmStart::Actor(a) => a.clone(),
        WarmStart::Policy(p) => {
            let mut a = ActorParams::from_policy(p, na, T::lit(config.warm_logit));
            a.temperature = T::lit(config.temperature);
            a
        }
        WarmStart::Stochastic(p) => ActorParams::from_stochastic(p, T::lit(config.temperature)),
    };
    let dim = match config.features {
        FeatureSpec::OneHot => n * na,
        FeatureSpec::Random { dim } => dim,
    };
    let radius = T::lit(
        config
            .radius
            .unwrap_or_else(|| mdp.r_max().to_f64_lossy() * (dim as f64).sqrt() / (1.0 - g.to_f64_lossy())),
    );
    let mut critic = match config.features {
        FeatureSpec::OneHot => CriticModel::one_hot(n, na, radius)?,
        FeatureSpec::Random { dim } => {
            CriticModel::random_features(n, na, dim, radius, &mut rng::stream(seed, streams::FEATURES))?
        }
    };
    let target = CriticTarget {
        m: config.m,
        normalized_return: config.normalized_return,
    };
    let scale = if config.normalized_return {
        T::one() - g
    } else {
        T::one()
    };
    let settings = ActorSettings {
        alpha: config.step_size,
        steps: config.actor_steps,
        rollout: config.actor_rollout,
        mode: config.actor_mode,
        burn_in: config.burn_in,
    };
    let mut noise_rng = rng::stream(seed, streams::NOISE);
    let mut sample_rng = rng::stream(seed, streams::SAMPLING);
    let mut actor_rng = rng::stream(seed, streams::ACTOR);

    let pol0 = actor.policy();
    let q0 = crate::mdp::policy_q(mdp, &pol0)?.scale(scale);
    critic = fit_weighted(mdp, &pol0, &critic, &q0)?.critic;
    let v0 = policy_value(mdp, &pol0)?;
    let mut records = Vec::with_capacity(iterations + 1);
    records.push(make_record(
        0,
        v_star,
        pol0.clone(),
        None,
        critic_state_values(&critic, &pol0, scale),
        v0,
        Some(critic.weights().to_vec()),
        None,
    ));
    for t in 1..=iterations {
        let exec = mix_uniform(&actor.policy(), errors.actor_keep_prob);
        let update = match config.critic_mode {
            Mode::Exact => critic_update_exact(mdp, &exec, &critic, target)?,
            Mode::Sampled => {
                let batch = collect_samples(mdp, &exec, config.n_samples, config.m, config.burn_in, &mut sample_rng)?;
                critic_update_sampled(mdp, &batch, &critic, target)?
            }
        };
        critic = update.critic;
        let mut draw = None;
        if !errors.critic_noise.is_none() {
            let (w, d) = inject_value_noise(critic.weights(), &errors.critic_noise, &mut noise_rng);
            critic.set_weights(w)?;
            draw = Some(d);
        }
        actor = actor_update(mdp, &actor, &critic, &settings, &mut actor_rng)?;
        let exec_next = mix_uniform(&actor.policy(), errors.actor_keep_prob);
        let v_pi = policy_value(mdp, &exec_next)?;
        let v_hat = critic_state_values(&critic, &exec_next, scale);
        records.push(make_record(
            t,
            v_star,
            exec_next,
            None,
            v_hat,
            v_pi,
            Some(critic.weights().to_vec()),
            draw,
        ));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ac::noise::CriticNoise;
    use crate::dp::policy_iteration_step;
    use crate::gridworld::{build_gridworld, canonical_layout};
    use crate::mdp::random_mdp;

    fn grid() -> Mdp<f64> {
        build_gridworld(&canonical_layout(10).unwrap(), 0.9).unwrap()
    }

    #[test]
    fn noiseless_long_rollout_tracks_policy_iteration() {
        let mdp = grid();
        let mut r = rng::stream(3, 0);
        let pi0 = DeterministicPolicy::random(100, 4, &mut r);
        let cfg = AcConfig {
            m: 1000,
            ..AcConfig::default()
        };
        let trace = run_ac(&mdp, &WarmStart::Policy(pi0.clone()), &cfg, &ErrorSpec::none(), 8, 3).unwrap();
        assert_eq!(trace.records.len(), 9);
        let mut pi = pi0;
        for rec in &trace.records {
            let v_pi = policy_value(&mdp, &pi).unwrap();
            let want = norm_l2(&sub_vec(&v_pi, &trace.v_star));
            assert!(
                (rec.policy_gap_l2 - want).abs() < 1e-6,
                "t={} {} vs {} {:?} {:?}",
                rec.t,
                rec.policy_gap_l2,
                want,
                rec.greedy_policy.as_ref().map(|g| g
                    .actions()
                    .iter()
                    .zip(pi.actions())
                    .enumerate()
                    .filter(|(_, (a, b))| a != b)
                    .collect::<Vec<_>>()),
                ()
            );
            pi = policy_iteration_step(&mdp, &pi).unwrap().0;
        }
        let gaps = trace.gaps_l2();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn same_seed_same_trace() {
        let mdp = random_mdp::<f64>(6, 3, 0.9, 1);
        let errors = ErrorSpec {
            critic_noise: CriticNoise {
                bias: 0.5,
                half_width: 0.5,
                mixture: true,
            },
            actor_keep_prob: 0.9,
        };
        let warm = WarmStart::Policy(DeterministicPolicy::constant(6, 0));
        let cfg = AcConfig {
            m: 5,
            ..AcConfig::default()
        };
        let a = run_ac(&mdp, &warm, &cfg, &errors, 10, 42).unwrap();
        let b = run_ac(&mdp, &warm, &cfg, &errors, 10, 42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = run_ac(&mdp, &warm, &cfg, &errors, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn function_approx_improves_and_is_deterministic() {
        let mdp = random_mdp::<f64>(5, 2, 0.9, 2);
        let cfg = AcConfig {
            variant: Variant::FunctionApprox,
            m: 10,
            n_samples: 400,
            actor_rollout: 50,
            actor_steps: 5,
            step_size: 1.0,
            ..AcConfig::default()
        };
        let warm = WarmStart::Actor(ActorParams::zeros(5, 2));
        let a = run_ac(&mdp, &warm, &cfg, &ErrorSpec::none(), 15, 7).unwrap();
        let b = run_ac(&mdp, &warm, &cfg, &ErrorSpec::none(), 15, 7).unwrap();
        assert_eq!(a, b);
        let gaps = a.policy_gaps_l2();
        assert!(gaps[15] < gaps[0], "{gaps:?}");
        for rec in &a.records {
            let w = rec.critic_weights.as_ref().unwrap();
            assert!(norm_l2(w) <= cfg.radius.unwrap_or(f64::INFINITY).max(1e9));
        }
    }

    #[test]
    fn exact_function_approx_without_noise_converges() {
        let mdp = random_mdp::<f64>(4, 2, 0.9, 6);
        let cfg = AcConfig {
            variant: Variant::FunctionApprox,
            m: 200,
            critic_mode: Mode::Exact,
            actor_mode: Mode::Exact,
            actor_steps: 50,
            step_size: 50.0,
            ..AcConfig::default()
        };
        let warm = WarmStart::Actor(ActorParams::zeros(4, 2));
        let t = run_ac(&mdp, &warm, &cfg, &ErrorSpec::none(), 20, 0).unwrap();
        let g = t.policy_gaps_l2();
        assert!(g[20] < 0.2 * g[0], "{g:?}");
    }

    #[test]
    fn bad_config_is_rejected() {
        let mdp = random_mdp::<f64>(3, 2, 0.9, 0);
        let warm = WarmStart::Policy(DeterministicPolicy::constant(3, 0));
        let cfg = AcConfig {
            m: 0,
            ..AcConfig::default()
        };
        assert!(run_ac(&mdp, &warm, &cfg, &ErrorSpec::none(), 3, 0)
            .unwrap_err()
            .is_config());
        let errs = ErrorSpec {
            actor_keep_prob: 1.2,
            ..ErrorSpec::none()
        };
        assert!(run_ac(&mdp, &warm, &AcConfig::default(), &errs, 3, 0)
            .unwrap_err()
            .is_config());
    }
}
