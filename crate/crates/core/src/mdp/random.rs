use rand::Rng;

use crate::rng;
use crate::scalar::Scalar;

use super::Mdp;

/// Dense random MDP: Dirichlet(1) transition rows, rewards uniform on [−1, 1],
/// uniform initial distribution. Deterministic in `seed`.
pub fn random_mdp<T: Scalar>(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Mdp<T> {
    let mut r = rng::stream(seed, rng::streams::INIT);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(rng::simplex_point(&mut r, n_states).into_iter().map(T::lit));
    }
    let reward = (0..n_states * n_actions)
        .map(|_| T::lit(r.random_range(-1.0..=1.0)))
        .collect();
    let init = vec![T::one() / T::from_usize_lossy(n_states); n_states];
    Mdp::from_flat(n_states, n_actions, transition, reward, T::lit(gamma), init).expect("generated MDP is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = random_mdp::<f64>(4, 2, 0.9, 11);
        let b = random_mdp::<f64>(4, 2, 0.9, 11);
        let c = random_mdp::<f64>(4, 2, 0.9, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.r_max() <= 1.0);
    }

    #[test]
    fn f32_instance_validates() {
        let m = random_mdp::<f32>(20, 5, 0.99, 3);
        assert_eq!(m.n_states(), 20);
    }
}
