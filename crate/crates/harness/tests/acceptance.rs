//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line each and exits non-zero if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsac::config::ExperimentConfig;
use wsac::figures::{figure_configs, reproduce_figure, FigureName};
use wsac::records::{stats, write_runs};
use wsac::{run_experiment, ExperimentOutput};
use wsac_core::ac::critic::{critic_update_exact, critic_update_sampled, CriticModel, CriticTarget};
use wsac_core::ac::{
    collect_samples, exact_gradient, objective, run_ac, AcConfig, ActorParams, CriticNoise, ErrorSpec, WarmStart,
};
use wsac_core::bounds::{
    bernstein_tail, critic_error_bound_complete, lower_bound, unbiased_recursion, validate_bound, BoundKind,
};
use wsac_core::dp::newton_step;
use wsac_core::linalg::{norm_l2, norm_sup, sub_vec};
use wsac_core::mdp::{greedy, policy_value, random_mdp, stationary_analysis};
use wsac_core::rng::{self, streams};
use wsac_core::{
    decompose_perturbation, newton_residual, BoundConstants, DeterministicPolicy, Matrix, Mdp64, StochasticPolicy64,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn final_gaps(out: &ExperimentOutput) -> Vec<f64> {
    let t = out.config.iterations;
    out.records
        .iter()
        .filter(|r| r.iteration == t)
        .map(|r| r.gap_l2)
        .collect()
}

fn gap_curves(out: &ExperimentOutput) -> Vec<Vec<f64>> {
    out.runs.iter().map(|r| r.trace.gaps_l2()).collect()
}

fn first_below(curve: &[f64], tol: f64) -> usize {
    curve.iter().position(|&g| g <= tol).unwrap_or(usize::MAX)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn pooled(a: f64, b: f64) -> f64 {
    ((a * a + b * b) / 2.0).sqrt()
}

fn newton_is_policy_iteration() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let n = rng.random_range(2..=20);
        let a = rng.random_range(2..=5);
        let gamma = [0.5, 0.9, 0.99][rng.random_range(0..3)];
        let mdp: Mdp64 = random_mdp(n, a, gamma, 1000 + i);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) / (1.0 - gamma)).collect();
        let (newton, _) = newton_step(&mdp, &v).map_err(|e| e.to_string())?;
        let pi = greedy(&mdp, &v).map_err(|e| e.to_string())?;
        let v_pi = policy_value(&mdp, &pi).map_err(|e| e.to_string())?;
        worst = worst.max(norm_sup(&sub_vec(&newton, &v_pi)));
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!(
            "max sup error {worst:.2e} over 100 MDPs in {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn decomposition_identity() -> Outcome {
    let mut worst_identity = 0.0f64;
    let mut worst_residual = 0.0f64;
    for i in 0..50u64 {
        let n = 3 + (i as usize % 8);
        let a = 2 + (i as usize % 3);
        let mdp: Mdp64 = random_mdp(n, a, 0.9, 500 + i);
        let config = AcConfig {
            m: 3,
            ..AcConfig::default()
        };
        let errors = ErrorSpec {
            critic_noise: CriticNoise {
                bias: 0.0,
                half_width: 1.0,
                mixture: false,
            },
            actor_keep_prob: 0.85,
        };
        let warm = WarmStart::Stochastic(StochasticPolicy64::uniform(n, a));
        let trace = run_ac(&mdp, &warm, &config, &errors, 2, i).map_err(|e| e.to_string())?;
        let (cur, next) = (&trace.records[1], &trace.records[2]);
        let pi_tilde = next
            .greedy_policy
            .as_ref()
            .ok_or("tabular record without greedy policy")?
            .to_stochastic(a);
        let d = decompose_perturbation(&mdp, &cur.executed_policy, &pi_tilde, &next.executed_policy)
            .map_err(|e| e.to_string())?;
        // Independent evaluations of both sides.
        let v_t = policy_value(&mdp, &cur.executed_policy).map_err(|e| e.to_string())?;
        let v_next = policy_value(&mdp, &greedy(&mdp, &v_t).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let v_hat = policy_value(&mdp, &next.executed_policy).map_err(|e| e.to_string())?;
        let lhs = sub_vec(&v_hat, &v_next);
        let rhs: Vec<f64> = d.e_c.iter().zip(&d.e_a).map(|(c, a)| c + a).collect();
        worst_identity = worst_identity.max(norm_sup(&sub_vec(&lhs, &rhs)));
        let res = newton_residual(&mdp, &trace, 1).map_err(|e| e.to_string())?;
        worst_residual = worst_residual.max(norm_sup(&sub_vec(&res.greedy_jacobian, &rhs)));
    }
    check(
        worst_identity <= 1e-8 && worst_residual <= 1e-8,
        format!(
            "identity error {worst_identity:.2e}, residual vs component sum {worst_residual:.2e} over 50 instances"
        ),
    )
}

fn run_figure(name: FigureName) -> Result<Vec<ExperimentOutput>, String> {
    let curves = figure_configs(name, 10).map_err(|e| e.to_string())?;
    reproduce_figure(&curves, None, None).map_err(|e| e.to_string())
}

fn warm_start_acceleration() -> Outcome {
    let start = Instant::now();
    let outs = run_figure(FigureName::Warmstart)?;
    let elapsed = start.elapsed();
    let (random, pi2) = (&outs[0], &outs[2]);
    let hit = |o: &ExperimentOutput| -> Vec<usize> { gap_curves(o).iter().map(|c| first_below(c, 1e-6)).collect() };
    let (hr, h2) = (hit(random), hit(pi2));
    let fast = h2.iter().all(|&t| t <= 3);
    let fewer = h2.iter().zip(&hr).all(|(a, b)| a < b);
    let monotone = outs
        .iter()
        .flat_map(gap_curves)
        .all(|c| c.windows(2).all(|w| w[1] <= w[0]));
    check(
        fast && fewer && monotone && elapsed < Duration::from_secs(60),
        format!(
            "first t with gap_l2 <= 1e-6: pi2 {h2:?}, random {hr:?}; non-increasing {monotone}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn rollout_floors() -> Outcome {
    let outs = run_figure(FigureName::Rollout)?;
    let m: Vec<f64> = outs.iter().map(|o| stats(&final_gaps(o)).mean).collect();
    let (g500, g50, g20, g5) = (m[0], m[1], m[2], m[3]);
    let ordered = g5 > g20 && g20 > g50;
    let within = g500 <= 2.0 * g50 && g50 <= 2.0 * g500;
    check(
        ordered && within,
        format!("mean gap at t=50: m=500 {g500:.3e}, m=50 {g50:.3e}, m=20 {g20:.3e}, m=5 {g5:.3e}"),
    )
}

fn bias_floor() -> Outcome {
    let outs = run_figure(FigureName::CriticBias)?;
    let s: Vec<_> = outs.iter().map(|o| stats(&final_gaps(o))).collect();
    let (b0, b05, b1, mix) = (s[0], s[1], s[2], s[4]);
    let sep_hi = b1.mean - b05.mean >= pooled(b1.std, b05.std);
    let sep_lo = b05.mean - b0.mean >= pooled(b05.std, b0.std);
    let mix_close = (b0.mean - mix.mean).abs() <= 2.0 * pooled(b0.std, mix.std);

    let c = 0.5;
    let mut cfg = ExperimentConfig::new("constant_bias");
    cfg.noise.bias = c;
    let constant = run_experiment(&cfg, None).map_err(|e| e.to_string())?;
    let floor = 0.5 * c * 100f64.sqrt();
    let lowest = final_gaps(&constant).into_iter().fold(f64::INFINITY, f64::min);
    check(
        sep_hi && sep_lo && mix_close && lowest >= floor,
        format!(
            "mean±std at t=50: b=1 {:.3}±{:.3}, b=0.5 {:.3}±{:.3}, b=0 {:.3}±{:.3}, mixture {:.3}±{:.3} \
             (separations {sep_hi}/{sep_lo}, mixture within 2 pooled std {mix_close}); constant c·1 min gap {lowest:.3} vs {floor}",
            b1.mean, b1.std, b05.mean, b05.std, b0.mean, b0.std, mix.mean, mix.std
        ),
    )
}

fn actor_perturbation() -> Outcome {
    let outs = run_figure(FigureName::ActorPerturb)?;
    let m: Vec<f64> = outs.iter().map(|o| stats(&final_gaps(o)).mean).collect();
    check(
        m.windows(2).all(|w| w[1] > w[0]),
        format!("mean gap at t=50 for p = 1, 0.95, 0.9, 0.8: {m:.3?}"),
    )
}

fn bernstein_domination() -> Outcome {
    let p = [[0.9, 0.1], [0.2, 0.8]];
    let stationary = [2.0 / 3.0, 1.0 / 3.0];
    let f = |x: usize| if x == 0 { 1.0 / 3.0 } else { -2.0 / 3.0 };
    let (n, reps) = (200u64, 10_000);
    let eps: Vec<f64> = (0..10).map(|i| 0.04 + 0.04 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exceed = vec![0usize; eps.len()];
    for _ in 0..reps {
        let mut x = usize::from(rng.random::<f64>() >= stationary[0]);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += f(x);
            x = usize::from(rng.random::<f64>() >= p[x][0]);
        }
        let mean = sum / n as f64;
        for (k, &e) in eps.iter().enumerate() {
            if mean > e {
                exceed[k] += 1;
            }
        }
    }
    let freq: Vec<f64> = exceed.iter().map(|&k| k as f64 / reps as f64).collect();
    let tails = eps
        .iter()
        .map(|&e| bernstein_tail(n, e, 2.0 / 9.0, 2.0 / 3.0, 0.7))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let report =
        validate_bound(std::slice::from_ref(&freq), &tails, BoundKind::Upper, 0.0).map_err(|e| e.to_string())?;
    check(
        report.violations.is_empty(),
        format!(
            "{} violations over 10 eps points; worst margin {:.3e}",
            report.violations.len(),
            report.worst_margin
        ),
    )
}

fn critic_error_scaling() -> Outcome {
    let mdp: Mdp64 = random_mdp(5, 2, 0.9, 11);
    let policy = StochasticPolicy64::uniform(5, 2);
    let target = CriticTarget {
        m: 10,
        normalized_return: true,
    };
    let d = 10;
    let radius = mdp.r_max() * (d as f64).sqrt() / (1.0 - mdp.gamma());
    let critic = CriticModel::one_hot(5, 2, radius).map_err(|e| e.to_string())?;
    let exact = critic_update_exact(&mdp, &policy, &critic, target)
        .map_err(|e| e.to_string())?
        .critic
        .q_table();
    let analysis = stationary_analysis(&mdp, &policy).map_err(|e| e.to_string())?;
    let rho = &analysis.state_action_dist;
    let sigma_star = rho.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let r_bar: f64 = (0..5)
        .flat_map(|s| (0..2).map(move |a| (s, a)))
        .map(|(s, a)| rho[(s, a)] * mdp.reward(s, a))
        .sum();

    let sizes = [100usize, 1_000, 10_000];
    let mut errors = vec![vec![0.0; sizes.len()]; 50];
    let mut eps = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        for (seed, row) in errors.iter_mut().enumerate() {
            let mut r = rng::stream(seed as u64, streams::SAMPLING);
            let batch = collect_samples(&mdp, &policy, n, target.m, None, &mut r).map_err(|e| e.to_string())?;
            let q = critic_update_sampled(&mdp, &batch, &critic, target)
                .map_err(|e| e.to_string())?
                .critic
                .q_table();
            row[k] = q.sub(&exact).max_abs();
        }
        let consts = BoundConstants {
            n_samples: n as u64,
            m: target.m as u32,
            p: 0.05,
            d: d as u32,
            radius,
            r_max: mdp.r_max(),
            r_bar,
            sigma_star,
            gamma: mdp.gamma(),
            lambda: analysis.lambda2_modulus,
            lambda_r: analysis.lambda_r,
            ..BoundConstants::default()
        };
        eps.push(
            critic_error_bound_complete(&consts, false)
                .map_err(|e| e.to_string())?
                .eps_p,
        );
    }
    let means: Vec<f64> = (0..sizes.len())
        .map(|k| stats(&errors.iter().map(|r| r[k]).collect::<Vec<_>>()).mean)
        .collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let ratio = means[2] / means[0];
    let report = validate_bound(&errors, &eps, BoundKind::Upper, 0.05).map_err(|e| e.to_string())?;
    check(
        decreasing && ratio <= 0.4 && report.violations.is_empty(),
        format!(
            "seed-mean max|Q_w - Q_w~| {}, ratio N=1e4/N=1e2 {ratio:.3}; 95% quantile below eps_p {}: {}",
            sci(&means),
            sci(&eps),
            report.violations.is_empty()
        ),
    )
}

fn gradient_matches_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let n = rng.random_range(2..=6);
        let a = rng.random_range(2..=4);
        let mdp: Mdp64 = random_mdp(n, a, 0.9, 300 + i);
        let theta = Matrix::from_fn(n, a, |_, _| rng.random_range(-2.0..2.0));
        let q = Matrix::from_fn(n, a, |_, _| rng.random_range(-5.0..5.0));
        let actor = ActorParams::new(theta, 1.0).map_err(|e| e.to_string())?;
        let g = exact_gradient(&mdp, &actor, &q).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut fd = Matrix::zeros(n, a);
        for s in 0..n {
            for b in 0..a {
                let mut plus = actor.clone();
                plus.theta[(s, b)] += h;
                let mut minus = actor.clone();
                minus.theta[(s, b)] -= h;
                let hp = objective(&mdp, &plus, &q).map_err(|e| e.to_string())?;
                let hm = objective(&mdp, &minus, &q).map_err(|e| e.to_string())?;
                fd[(s, b)] = (hp - hm) / (2.0 * h);
            }
        }
        worst = worst.max(norm_l2(g.sub(&fd).as_slice()) / norm_l2(fd.as_slice()));
    }
    check(worst <= 1e-4, format!("max relative error {worst:.2e} over 20 triples"))
}

fn recursion_calculators() -> Outcome {
    let series = unbiased_recursion(1.0, 1.0, 0.5, 5);
    let exact = series.iter().enumerate().all(|(t, &a)| a == 0.5f64.powi(1 << t));

    // Shared transitions and a constant reward offset make v* − v^{π₀} a
    // constant vector, which every row-stochastic product preserves.
    let n = 4;
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| rng::simplex_point(&mut r, n)).collect();
    let transition: Vec<Vec<Vec<f64>>> = rows.iter().map(|row| vec![row.clone(), row.clone()]).collect();
    let reward: Vec<Vec<f64>> = (0..n).map(|s| vec![s as f64, s as f64 + 0.5]).collect();
    let mdp = Mdp64::new(transition, reward, 0.9, vec![0.25; n]).map_err(|e| e.to_string())?;
    let pi0 = DeterministicPolicy::constant(n, 0).to_stochastic(2);
    let mut prev: Option<f64> = None;
    let mut worst_ratio = 0.0f64;
    let mut reached = None;
    for t in 0..400 {
        let mut pols = vec![pi0.clone()];
        pols.extend((0..=t).map(|k| DeterministicPolicy::constant(n, k % 2).to_stochastic(2)));
        let lb = lower_bound(&mdp, &pols, &vec![vec![0.0; n]; t + 1]).map_err(|e| e.to_string())?;
        if let Some(p) = prev {
            worst_ratio = worst_ratio.max((lb.norm_l2 / p / 0.9 - 1.0).abs());
        }
        if lb.norm_l2 < 1e-12 {
            reached = Some(t);
            break;
        }
        prev = Some(lb.norm_l2);
    }
    check(
        exact && reached.is_some() && worst_ratio < 1e-9,
        format!("unbiased series exact {exact}; lower bound reached 1e-12 at t={reached:?}, max ratio deviation from gamma {worst_ratio:.1e}"),
    )
}

fn determinism() -> Outcome {
    let mut tabular = ExperimentConfig::new("det_tabular");
    tabular.iterations = 10;
    tabular.ac.m = 5;
    tabular.noise.half_width = 0.5;
    tabular.noise.bias = 0.5;
    tabular.noise.mixture = true;
    tabular.noise.actor_keep_prob = 0.9;
    let mut fa = ExperimentConfig::new("det_fa");
    fa.iterations = 3;
    fa.seeds = vec![4, 9];
    fa.mdp.kind = wsac::config::MdpKind::Random;
    fa.mdp.states = 5;
    fa.ac.variant = wsac_core::ac::Variant::FunctionApprox;
    fa.ac.m = 5;
    fa.ac.n_samples = 200;
    fa.ac.actor_rollout = 50;
    fa.ac.actor_steps = 3;
    fa.noise.half_width = 0.1;
    let bytes = |cfg: &ExperimentConfig, threads: Option<usize>| -> Result<Vec<u8>, String> {
        let out = run_experiment(cfg, threads).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_runs(&mut buf, &out.records).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let mut same = true;
    for cfg in [&tabular, &fa] {
        let a = bytes(cfg, Some(1))?;
        same &= a == bytes(cfg, Some(4))? && a == bytes(cfg, None)?;
    }
    check(
        same,
        format!("runs.csv byte-identical across reruns and thread counts: {same}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("newton-is-policy-iteration", newton_is_policy_iteration),
        ("decomposition-identity", decomposition_identity),
        ("warm-start-acceleration", warm_start_acceleration),
        ("rollout-length-floors", rollout_floors),
        ("bias-floor", bias_floor),
        ("actor-perturbation-degradation", actor_perturbation),
        ("bernstein-domination", bernstein_domination),
        ("critic-error-scaling", critic_error_scaling),
        ("gradient-finite-differences", gradient_matches_finite_differences),
        ("recursion-calculators", recursion_calculators),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
