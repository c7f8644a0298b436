use wsac_core::ac::{run_ac, AcConfig, CriticNoise, ErrorSpec, WarmStart};
use wsac_core::analysis::{estimate_bias, newton_residual};
use wsac_core::mdp::random_mdp;
use wsac_core::{rng, DeterministicPolicy, Mdp64};

fn residuals_at(mdp: &Mdp64, errors: &ErrorSpec<f64>, seeds: u64, t: usize) -> Vec<Vec<f64>> {
    let cfg = AcConfig {
        m: 5,
        ..AcConfig::default()
    };
    let warm = WarmStart::Policy(DeterministicPolicy::random(6, 3, &mut rng::stream(99, 0)));
    (0..seeds)
        .map(|seed| {
            let trace = run_ac(mdp, &warm, &cfg, errors, t + 1, seed).unwrap();
            newton_residual(mdp, &trace, t).unwrap().greedy_jacobian
        })
        .collect()
}

#[test]
fn noiseless_updates_have_no_bias_or_noise() {
    let mdp: Mdp64 = random_mdp(6, 3, 0.9, 0);
    let cfg = AcConfig::default();
    let warm = WarmStart::Policy(DeterministicPolicy::constant(6, 0));
    let res: Vec<Vec<f64>> = (0..4)
        .map(|s| {
            newton_residual(&mdp, &run_ac(&mdp, &warm, &cfg, &ErrorSpec::none(), 3, s).unwrap(), 1)
                .unwrap()
                .greedy_jacobian
        })
        .collect();
    let est = estimate_bias(&res, false).unwrap();
    assert!(est.bias_hat.iter().all(|b| b.abs() < 1e-10));
    assert!(est.noise_cov_trace.unwrap() < 1e-20);
}

#[test]
fn constant_shifts_leave_the_residual_unchanged() {
    // A ±c·1 shift never changes a greedy choice, so E_t sees none of it.
    let mdp: Mdp64 = random_mdp(6, 3, 0.9, 1);
    let errors = ErrorSpec {
        critic_noise: CriticNoise {
            bias: 0.5,
            half_width: 0.0,
            mixture: true,
        },
        actor_keep_prob: 1.0,
    };
    let est = estimate_bias(&residuals_at(&mdp, &errors, 100, 1), false).unwrap();
    assert_eq!(est.n_seeds, 100);
    for (b, c) in est.bias_hat.iter().zip(&est.ci_halfwidth) {
        assert!(b.abs() <= c + 1e-12, "{b} vs {c}");
    }
}

fn uniform_noise() -> ErrorSpec<f64> {
    ErrorSpec {
        critic_noise: CriticNoise {
            bias: 0.0,
            half_width: 1.0,
            mixture: false,
        },
        actor_keep_prob: 1.0,
    }
}

#[test]
fn injected_noise_mean_stays_inside_the_envelope() {
    let mdp: Mdp64 = random_mdp(6, 3, 0.9, 2);
    let warm = WarmStart::Policy(DeterministicPolicy::constant(6, 0));
    let cfg = AcConfig {
        m: 5,
        ..AcConfig::default()
    };
    let draws: Vec<Vec<f64>> = (0..100)
        .map(|seed| {
            let trace = run_ac(&mdp, &warm, &cfg, &uniform_noise(), 2, seed).unwrap();
            trace.records[2].noise.clone().unwrap().values
        })
        .collect();
    let est = estimate_bias(&draws, false).unwrap();
    for (b, c) in est.bias_hat.iter().zip(&est.ci_halfwidth) {
        assert!(b.abs() <= *c, "{b} vs {c}");
    }
}

#[test]
fn greedy_selection_turns_zero_mean_noise_into_negative_bias() {
    let mdp: Mdp64 = random_mdp(6, 3, 0.9, 2);
    let est = estimate_bias(&residuals_at(&mdp, &uniform_noise(), 100, 1), false).unwrap();
    assert!(est.bias_hat.iter().zip(&est.ci_halfwidth).all(|(b, c)| *b < -c));
}
