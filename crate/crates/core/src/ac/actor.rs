//! Tabular softmax actor `π_θ(a|s) ∝ exp(θ[s,a] / τ)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_l2, Lu, Matrix};
use crate::mdp::{induce_policy_matrices, stationary_of_chain, DeterministicPolicy, Mdp, StochasticPolicy};
use crate::rng::Rng as ChaRng;
use crate::scalar::Scalar;

use super::critic::CriticModel;
use super::sampling::{burned_in_pair, default_burn_in, sample_index, step};
use super::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ActorParams<T: Scalar> {
    pub theta: Matrix<T>,
    pub temperature: T,
}

impl<T: Scalar> ActorParams<T> {
    pub fn new(theta: Matrix<T>, temperature: T) -> Result<Self> {
        if !(temperature > T::zero()) {
            return Err(Error::config("softmax temperature must be positive"));
        }
        Ok(Self { theta, temperature })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            theta: Matrix::zeros(n_states, n_actions),
            temperature: T::one(),
        }
    }

    /// Logit `boost` on each state's chosen action, zero elsewhere.
    pub fn from_policy(policy: &DeterministicPolicy, n_actions: usize, boost: T) -> Self {
        Self {
            theta: Matrix::from_fn(policy.len(), n_actions, |s, a| {
                if policy.action(s) == a {
                    boost
                } else {
                    T::zero()
                }
            }),
            temperature: T::one(),
        }
    }

    /// Logits `τ·ln π` reproducing `policy` exactly (probabilities floored at 1e-300).
    pub fn from_stochastic(policy: &StochasticPolicy<T>, temperature: T) -> Self {
        let floor = T::min_positive_value().max(T::lit(1e-300));
        let theta = Matrix::from_fn(policy.probs().rows(), policy.n_actions(), |s, a| {
            temperature * policy.prob(s, a).max(floor).ln()
        });
        Self { theta, temperature }
    }

    pub fn n_states(&self) -> usize {
        self.theta.rows()
    }

    pub fn n_actions(&self) -> usize {
        self.theta.cols()
    }

    fn probs_row(&self, s: usize) -> Vec<T> {
        let row = self.theta.row(s);
        let top = row.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = row.iter().map(|&x| ((x - top) / self.temperature).exp()).collect();
        let z: T = e.iter().copied().sum();
        e.into_iter().map(|x| x / z).collect()
    }

    pub fn policy(&self) -> StochasticPolicy<T> {
        let rows: Vec<Vec<T>> = (0..self.n_states()).map(|s| self.probs_row(s)).collect();
        StochasticPolicy::new(Matrix::from_rows(&rows).expect("rectangular")).expect("softmax rows are distributions")
    }

    /// `ψ_θ(s,a)` restricted to the logits of state `s`: `∂π(a|s)/∂θ[s,b]`.
    /// Entries for other states are zero.
    pub fn score(&self, s: usize, a: usize) -> Vec<T> {
        let p = self.probs_row(s);
        (0..p.len())
            .map(|b| {
                let ind = if a == b { T::one() } else { T::zero() };
                p[a] * (ind - p[b]) / self.temperature
            })
            .collect()
    }
}

/// Assumption constants of the unit-free softmax class, divided by the
/// appropriate power of the temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConstants {
    /// `sup ‖∇_θ π(a|s)‖₂ = √2/4`, attained with two actions at probability ½.
    pub c_psi: f64,
    /// `sup ‖∇²_θ π(a|s)‖₂ = √3/9`.
    pub l_psi: f64,
    /// Total-variation Lipschitz constant of `θ ↦ π(·|s)`, `√2/4`.
    pub c_pi: f64,
}

pub fn softmax_constants(temperature: f64) -> SoftmaxConstants {
    let s2 = std::f64::consts::SQRT_2 / 4.0;
    SoftmaxConstants {
        c_psi: s2 / temperature,
        l_psi: 3f64.sqrt() / 9.0 / (temperature * temperature),
        c_pi: s2 / temperature,
    }
}

/// `h(ω, θ) = Σ_{s,a} ρ^{π_θ}(s,a) Q_ω(s,a)`.
pub fn objective<T: Scalar>(mdp: &Mdp<T>, actor: &ActorParams<T>, q: &Matrix<T>) -> Result<T> {
    let pol = actor.policy();
    let pm = induce_policy_matrices(mdp, &pol)?;
    let (d, ..) = stationary_of_chain(&pm.p)?;
    Ok((0..mdp.n_states()).map(|s| d[s] * dot(pol.row(s), q.row(s))).sum())
}

/// Exact `∇_θ h`, including the dependence of the stationary distribution on θ.
///
/// With `M = I − P_π + 1 dᵀ` and `w = M⁻¹ V`, perturbing row `s` of `P_π`
/// moves `h` by `d(s) Σ_a ∂π(a|s) (Q(s,a) + P(·|s,a)·w)`.
pub fn exact_gradient<T: Scalar>(mdp: &Mdp<T>, actor: &ActorParams<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    check_dim("Q table states", mdp.n_states(), q.rows())?;
    check_dim("Q table actions", mdp.n_actions(), q.cols())?;
    let n = mdp.n_states();
    let pol = actor.policy();
    let pm = induce_policy_matrices(mdp, &pol)?;
    let (d, ..) = stationary_of_chain(&pm.p)?;
    let v: Vec<T> = (0..n).map(|s| dot(pol.row(s), q.row(s))).collect();
    let mut fund = Matrix::identity(n).sub(&pm.p);
    for i in 0..n {
        for j in 0..n {
            fund[(i, j)] += d[j];
        }
    }
    let w = Lu::factor_checked(&fund, "stationary sensitivity")?.solve(&v);
    Ok(Matrix::from_fn(n, mdp.n_actions(), |s, b| {
        let p = pol.row(s);
        let adv = |a: usize| q[(s, a)] + dot(mdp.transition_row(s, a), &w);
        let mean: T = (0..p.len()).map(|a| p[a] * adv(a)).sum();
        d[s] * p[b] * (adv(b) - mean) / actor.temperature
    }))
}

/// The policy-gradient term `Σ_{s,a} ρ(s,a) Q(s,a) ∇_θ log π(a|s)` with `ρ` held fixed.
/// This is the mean of the sampled update direction.
pub fn policy_gradient_term<T: Scalar>(mdp: &Mdp<T>, actor: &ActorParams<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    let pol = actor.policy();
    let pm = induce_policy_matrices(mdp, &pol)?;
    let (d, ..) = stationary_of_chain(&pm.p)?;
    Ok(Matrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, b| {
        let mean = dot(pol.row(s), q.row(s));
        d[s] * pol.prob(s, b) * (q[(s, b)] - mean) / actor.temperature
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorSettings {
    /// Step size α.
    pub alpha: f64,
    /// Gradient steps per update, `N_a`.
    pub steps: usize,
    /// Rollout length `l` for the sampled gradient.
    pub rollout: usize,
    pub mode: Mode,
    pub burn_in: Option<usize>,
}

/// `N_a` ascent steps on `h(ω, ·)`.
///
/// Sampled mode averages `Q_ω(s,a) ∇_θ log π(a|s)` along one continuing
/// length-`l` trajectory per step; the chain is burned in once per call.
pub fn actor_update<T: Scalar>(
    mdp: &Mdp<T>,
    actor: &ActorParams<T>,
    critic: &CriticModel<T>,
    settings: &ActorSettings,
    rng: &mut ChaRng,
) -> Result<ActorParams<T>> {
    check_dim("actor states", mdp.n_states(), actor.n_states())?;
    check_dim("actor actions", mdp.n_actions(), actor.n_actions())?;
    let alpha = T::lit(settings.alpha);
    let q = critic.q_table();
    let mut cur = actor.clone();
    if settings.steps == 0 {
        return Ok(cur);
    }
    match settings.mode {
        Mode::Exact => {
            for _ in 0..settings.steps {
                let g = exact_gradient(mdp, &cur, &q)?;
                cur.theta = cur.theta.add(&g.scale(alpha));
            }
        }
        Mode::Sampled => {
            if settings.rollout == 0 {
                return Err(Error::config("sampled actor update needs rollout l ≥ 1"));
            }
            let pol = cur.policy();
            let burn = settings.burn_in.unwrap_or_else(|| {
                let pm = induce_policy_matrices(mdp, &pol).expect("dimensions checked");
                stationary_of_chain(&pm.p).map_or(0, |(_, l2, ..)| default_burn_in(1.0 - l2))
            });
            let mut at = burned_in_pair(mdp, &pol, burn, rng);
            let inv_l = T::one() / T::from_usize_lossy(settings.rollout);
            for _ in 0..settings.steps {
                let pol = cur.policy();
                let mut g = Matrix::zeros(mdp.n_states(), mdp.n_actions());
                for _ in 0..settings.rollout {
                    let (s, a) = at;
                    let p = pol.row(s);
                    let qsa = q[(s, a)] * inv_l / cur.temperature;
                    for (b, gb) in g.row_mut(s).iter_mut().enumerate() {
                        let ind = if a == b { T::one() } else { T::zero() };
                        *gb += qsa * (ind - p[b]);
                    }
                    at = step(mdp, &pol, s, a, rng);
                }
                cur.theta = cur.theta.add(&g.scale(alpha));
                // Keep the chain's next action consistent with the updated policy.
                let s = at.0;
                at = (s, sample_index(cur.policy().row(s), rng));
            }
        }
    }
    Ok(cur)
}

/// Inputs and output of the `μ = g_min / (h*_max − h_max)` recipe over a
/// finite probe set; the best probe plays the role of θ*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlEstimate {
    pub g_min: f64,
    pub h_max: f64,
    pub h_star_max: f64,
    pub mu: f64,
}

pub fn pl_constant<T: Scalar>(mdp: &Mdp<T>, q: &Matrix<T>, probes: &[ActorParams<T>]) -> Result<PlEstimate> {
    if probes.len() < 2 {
        return Err(Error::config("the μ recipe needs at least two probe parameters"));
    }
    let mut hs = Vec::with_capacity(probes.len());
    for p in probes {
        let h = objective(mdp, p, q)?.to_f64_lossy();
        let g = norm_l2(exact_gradient(mdp, p, q)?.as_slice()).to_f64_lossy();
        hs.push((h, g));
    }
    let best = (0..hs.len()).fold(0, |b, i| if hs[i].0 > hs[b].0 { i } else { b });
    let h_star_max = hs[best].0;
    let others = hs.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, x)| *x);
    let (h_max, g_min) = others.fold((f64::NEG_INFINITY, f64::INFINITY), |(h, g), (hi, gi)| {
        (h.max(hi), g.min(gi))
    });
    let gap = h_star_max - h_max;
    if !(gap > 0.0) {
        return Err(Error::FormulaDomain {
            formula: "mu recipe",
            term: "h*_max - h_max",
            value: gap,
        });
    }
    Ok(PlEstimate {
        g_min,
        h_max,
        h_star_max,
        mu: g_min / gap,
    })
}
