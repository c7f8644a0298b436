//! Turning a resolved config into traces and record rows.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wsac_core::ac::{run_ac_with_oracle, WarmStart};
use wsac_core::dp::{policy_iteration_step, solve_optimal};
use wsac_core::gridworld::{build_gridworld, canonical_layout};
use wsac_core::linalg::norm_l2;
use wsac_core::mdp::{greedy, policy_value, random_mdp, MdpFile};
use wsac_core::rng::{self, streams};
use wsac_core::{estimate_bias, newton_residual, AcTrace64, DeterministicPolicy, Matrix, Mdp64, StochasticPolicy64};

use crate::config::{ExperimentConfig, MdpKind, MdpSpec, RandomInit, WarmKind};
use crate::error::{HarnessError, Result};
use crate::records::{summarize, RunRecord, SummaryRow};

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn build_mdp(spec: &MdpSpec) -> Result<Mdp64> {
    Ok(match spec.kind {
        MdpKind::Gridworld => {
            let mut layout = match &spec.layout {
                Some(l) => l.clone(),
                None => canonical_layout(spec.size)?,
            };
            layout.absorbing_goal |= spec.absorbing_goal;
            build_gridworld(&layout, spec.gamma)?
        }
        MdpKind::File => {
            let path = spec
                .path
                .as_deref()
                .ok_or_else(|| HarnessError::config("mdp.path is required"))?;
            let file: MdpFile<f64> = read_json(path)?;
            Mdp64::try_from(file)?
        }
        MdpKind::Random => random_mdp(spec.states, spec.actions, spec.gamma, spec.seed),
    })
}

/// Either a list of actions or a row-stochastic table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyFile {
    Deterministic(Vec<usize>),
    Stochastic(Vec<Vec<f64>>),
}

/// Initial policy: a random one (seeded draws use the warm-start stream),
/// optionally improved by `k` exact policy-iteration steps.
pub fn warm_start(cfg: &ExperimentConfig, mdp: &Mdp64, seed: u64) -> Result<WarmStart<f64>> {
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    if cfg.warm.kind == WarmKind::PolicyFile {
        let path = cfg
            .warm
            .path
            .as_deref()
            .ok_or_else(|| HarnessError::config("warm.path is required"))?;
        return Ok(match read_json::<PolicyFile>(path)? {
            PolicyFile::Deterministic(a) => {
                if a.len() != n {
                    return Err(HarnessError::config(format!(
                        "{}: policy covers {} states, MDP has {n}",
                        path.display(),
                        a.len()
                    )));
                }
                WarmStart::Policy(DeterministicPolicy::new(a, na)?)
            }
            PolicyFile::Stochastic(rows) => {
                if rows.len() != n {
                    return Err(HarnessError::config(format!(
                        "{}: policy covers {} states, MDP has {n}",
                        path.display(),
                        rows.len()
                    )));
                }
                WarmStart::Stochastic(StochasticPolicy64::new(Matrix::from_rows(&rows)?)?)
            }
        });
    }
    let mut rng = rng::stream(seed, streams::WARM_START);
    let k = if cfg.warm.kind == WarmKind::PiIterations {
        cfg.warm.k
    } else {
        0
    };
    let mut policy = match cfg.warm.random {
        RandomInit::Uniform | RandomInit::Stochastic => {
            let pi0 = if cfg.warm.random == RandomInit::Uniform {
                StochasticPolicy64::uniform(n, na)
            } else {
                StochasticPolicy64::random(n, na, &mut rng)
            };
            if k == 0 {
                return Ok(WarmStart::Stochastic(pi0));
            }
            greedy(mdp, &policy_value(mdp, &pi0)?)?
        }
        RandomInit::Deterministic => {
            let pi0 = DeterministicPolicy::random(n, na, &mut rng);
            if k == 0 {
                return Ok(WarmStart::Policy(pi0));
            }
            policy_iteration_step(mdp, &pi0)?.0
        }
    };
    for _ in 1..k {
        policy = policy_iteration_step(mdp, &policy)?.0;
    }
    Ok(WarmStart::Policy(policy))
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: AcTrace64,
    pub wall_ms: f64,
}

fn run_seed(cfg: &ExperimentConfig, mdp: &Mdp64, v_star: &[f64], seed: u64) -> Result<SeedRun> {
    let start = Instant::now();
    let warm = warm_start(cfg, mdp, seed)?;
    let errors = cfg.noise.to_error_spec();
    let trace = run_ac_with_oracle(mdp, v_star, &warm, &cfg.ac, &errors, cfg.iterations, seed)?;
    let wall_ms = if cfg.output.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(SeedRun { seed, trace, wall_ms })
}

/// Runs every seed, in parallel when `threads` allows. Results come back in
/// seed-list order and do not depend on the thread count.
pub fn run_seeds(cfg: &ExperimentConfig, mdp: &Mdp64, threads: Option<usize>) -> Result<Vec<SeedRun>> {
    let v_star = solve_optimal(mdp)?.v_star;
    let work = || -> Result<Vec<SeedRun>> { cfg.seeds.par_iter().map(|&s| run_seed(cfg, mdp, &v_star, s)).collect() };
    match threads {
        Some(1) => cfg.seeds.iter().map(|&s| run_seed(cfg, mdp, &v_star, s)).collect(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| HarnessError::config(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// `(bias_l2, noise_trace)` for one iteration.
pub type BiasColumns = (f64, Option<f64>);

/// Cross-seed estimate for the update that produced record `t`:
/// `(‖b̂‖₂, tr Σ̂)` from the Newton residuals of all seeds.
pub fn bias_columns(mdp: &Mdp64, runs: &[SeedRun], iterations: usize) -> Result<Vec<Option<BiasColumns>>> {
    let mut out = vec![None];
    for t in 1..=iterations {
        let residuals = runs
            .iter()
            .map(|r| newton_residual(mdp, &r.trace, t - 1).map(|n| n.greedy_jacobian))
            .collect::<wsac_core::Result<Vec<_>>>()?;
        let est = estimate_bias(&residuals, true)?;
        out.push(Some((norm_l2(&est.bias_hat), est.noise_cov_trace)));
    }
    Ok(out)
}

pub fn to_records(cfg: &ExperimentConfig, mdp: &Mdp64, runs: &[SeedRun]) -> Result<Vec<RunRecord>> {
    let bias = if cfg.output.bias {
        bias_columns(mdp, runs, cfg.iterations)?
    } else {
        vec![None; cfg.iterations + 1]
    };
    let mut out = Vec::with_capacity(runs.len() * (cfg.iterations + 1));
    for run in runs {
        for rec in &run.trace.records {
            let b = bias[rec.t];
            out.push(RunRecord {
                experiment_id: cfg.experiment_id.clone(),
                seed: run.seed,
                iteration: rec.t,
                gap_sup: rec.gap_sup,
                gap_l2: rec.gap_l2,
                bias_l2: b.map(|x| x.0),
                noise_trace: b.and_then(|x| x.1),
                wall_ms: run.wall_ms,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub runs: Vec<SeedRun>,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mdp = build_mdp(&cfg.mdp)?;
    let runs = run_seeds(cfg, &mdp, threads)?;
    let records = to_records(cfg, &mdp, &runs)?;
    let summary = summarize(&records);
    Ok(ExperimentOutput {
        config: cfg.clone(),
        runs,
        records,
        summary,
    })
}
