use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mdp::{DeterministicPolicy, StochasticPolicy};
use crate::scalar::Scalar;

/// Uniform critic noise on `[b − w, b + w]`; in mixture mode the sign of `b`
/// is redrawn each iteration and shared by all states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CriticNoise<T: Scalar> {
    pub bias: T,
    pub half_width: T,
    #[serde(default)]
    pub mixture: bool,
}

impl<T: Scalar> CriticNoise<T> {
    pub fn none() -> Self {
        Self {
            bias: T::zero(),
            half_width: T::zero(),
            mixture: false,
        }
    }

    pub fn is_none(&self) -> bool {
        self.bias == T::zero() && self.half_width == T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ErrorSpec<T: Scalar> {
    pub critic_noise: CriticNoise<T>,
    /// Probability of executing the learnt action; the rest is uniform.
    pub actor_keep_prob: T,
}

impl<T: Scalar> Default for ErrorSpec<T> {
    fn default() -> Self {
        Self::none()
    }
}

impl<T: Scalar> ErrorSpec<T> {
    pub fn none() -> Self {
        Self {
            critic_noise: CriticNoise::none(),
            actor_keep_prob: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.critic_noise.half_width >= T::zero()) {
            return Err(Error::config("noise half-width must be nonnegative"));
        }
        if !(self.actor_keep_prob >= T::zero() && self.actor_keep_prob <= T::one()) {
            return Err(Error::config("actor_keep_prob must lie in [0, 1]"));
        }
        if !self.critic_noise.bias.is_finite() {
            return Err(Error::config("noise bias must be finite"));
        }
        Ok(())
    }
}

/// One realization of the critic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NoiseDraw<T: Scalar> {
    /// Bias actually applied this iteration (`±b` in mixture mode).
    pub bias: T,
    pub values: Vec<T>,
}

/// Adds `e(t)` to `v`. Draws nothing when the noise is identically zero.
pub fn inject_value_noise<T: Scalar, R: Rng + ?Sized>(
    v: &[T],
    noise: &CriticNoise<T>,
    rng: &mut R,
) -> (Vec<T>, NoiseDraw<T>) {
    let bias = if noise.mixture && rng.random::<bool>() {
        -noise.bias
    } else {
        noise.bias
    };
    let values: Vec<T> = if noise.half_width == T::zero() {
        vec![bias; v.len()]
    } else {
        let two = T::lit(2.0);
        (0..v.len())
            .map(|_| bias + noise.half_width * (two * T::lit(rng.random::<f64>()) - T::one()))
            .collect()
    };
    let out = v.iter().zip(&values).map(|(&x, &e)| x + e).collect();
    (out, NoiseDraw { bias, values })
}

/// `π̂(a|s) = p·1[a = π(s)] + (1 − p)/|A|`.
pub fn perturb_policy<T: Scalar>(policy: &DeterministicPolicy, p: T, n_actions: usize) -> Result<StochasticPolicy<T>> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::config("keep probability must lie in [0, 1]"));
    }
    let spread = (T::one() - p) / T::from_usize_lossy(n_actions);
    StochasticPolicy::new(Matrix::from_fn(policy.len(), n_actions, |s, a| {
        if policy.action(s) == a {
            p + spread
        } else {
            spread
        }
    }))
}

/// `p·π + (1 − p)/|A|` for an already stochastic policy.
pub fn mix_uniform<T: Scalar>(policy: &StochasticPolicy<T>, p: T) -> StochasticPolicy<T> {
    let na = policy.n_actions();
    let spread = (T::one() - p) / T::from_usize_lossy(na);
    let probs = Matrix::from_fn(policy.probs().rows(), na, |s, a| p * policy.prob(s, a) + spread);
    StochasticPolicy::new(probs).expect("mixture of distributions is a distribution")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_noise_is_identity() {
        let v = vec![1.0, -2.0, 3.5];
        let (out, draw) = inject_value_noise(&v, &CriticNoise::none(), &mut rng::stream(0, 0));
        assert_eq!(out, v);
        assert_eq!(draw.bias, 0.0);
    }

    #[test]
    fn draws_stay_in_band() {
        let noise = CriticNoise {
            bias: 1.0,
            half_width: 0.5,
            mixture: false,
        };
        let (_, d) = inject_value_noise(&vec![0.0; 1000], &noise, &mut rng::stream(1, 0));
        assert!(d.values.iter().all(|e| (0.5..=1.5).contains(e)));
    }

    #[test]
    fn mixture_sign_is_shared_and_centered() {
        let noise = CriticNoise {
            bias: 0.5,
            half_width: 0.5,
            mixture: true,
        };
        let mut r = rng::stream(2, 0);
        let mut total = 0.0;
        let k = 10_000;
        for _ in 0..k {
            let (_, d) = inject_value_noise(&[0.0f64; 3], &noise, &mut r);
            assert!(d.bias == 0.5 || d.bias == -0.5);
            assert!(d
                .values
                .iter()
                .all(|e: &f64| e.signum() == d.bias.signum() || *e == 0.0));
            total += d.values[0];
        }
        let mean: f64 = total / k as f64;
        assert!(mean.abs() <= 3.0 * 0.5 / (k as f64).sqrt());
    }

    #[test]
    fn perturbation_arithmetic() {
        let pi = DeterministicPolicy::new(vec![2, 0], 4).unwrap();
        let id = perturb_policy::<f64>(&pi, 1.0, 4).unwrap();
        assert_eq!(id.row(0), &[0.0, 0.0, 1.0, 0.0]);
        let p = perturb_policy::<f64>(&pi, 0.7, 4).unwrap();
        assert!((p.prob(0, 2) - 0.775).abs() < 1e-15);
        assert!((p.prob(0, 1) - 0.075).abs() < 1e-15);
        let u = perturb_policy::<f64>(&pi, 0.0, 4).unwrap();
        assert!(u.row(1).iter().all(|&x| x == 0.25));
        assert!(perturb_policy::<f64>(&pi, 1.5, 4).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = ErrorSpec::<f64>::none();
        assert!(s.validate().is_ok());
        s.critic_noise.half_width = -1.0;
        assert!(s.validate().is_err());
    }
}
