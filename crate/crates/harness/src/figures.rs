//! Canned gridworld sweeps behind the convergence figures. Each curve is an
//! ordinary experiment; the sweep writes one run directory per curve plus a
//! combined `summary.csv`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::config::{ExperimentConfig, WarmKind};
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, ExperimentOutput};
use crate::manifest::{create_dir, write_experiment};
use crate::records::write_summary_file;

pub const SIZES: [usize; 3] = [10, 15, 20];
pub const ROLLOUT_GRID: [usize; 4] = [500, 50, 20, 5];
pub const BIAS_GRID: [f64; 4] = [0.0, 0.5, 1.0, -1.0];
pub const MIXTURE_BIAS: f64 = 0.5;
pub const KEEP_PROB_GRID: [f64; 4] = [1.0, 0.95, 0.9, 0.8];
/// Half-width of the uniform noise around each bias level.
pub const NOISE_HALF_WIDTH: f64 = 0.5;
/// Rollout used wherever the sweep does not vary it; long enough that the
/// evaluation step is exact to machine precision at γ = 0.9.
pub const LONG_ROLLOUT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureName {
    Warmstart,
    Rollout,
    CriticBias,
    ActorPerturb,
}

impl FigureName {
    pub const ALL: [FigureName; 4] = [Self::Warmstart, Self::Rollout, Self::CriticBias, Self::ActorPerturb];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Warmstart => "fig_warmstart",
            Self::Rollout => "fig_rollout",
            Self::CriticBias => "fig_critic_bias",
            Self::ActorPerturb => "fig_actor_perturb",
        }
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|n| n.as_str()).collect();
            HarnessError::config(format!("unknown figure {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

fn number_label(x: f64) -> String {
    let s = format!("{}", x.abs()).replace('.', "p");
    if x < 0.0 {
        format!("neg{s}")
    } else {
        s
    }
}

fn base(id: String, size: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(id);
    cfg.iterations = 50;
    cfg.seeds = (0..5).collect();
    cfg.mdp.size = size;
    cfg.ac.m = LONG_ROLLOUT;
    cfg
}

/// The curves of one figure, in legend order.
pub fn figure_configs(name: FigureName, size: usize) -> Result<Vec<ExperimentConfig>> {
    if !SIZES.contains(&size) {
        return Err(HarnessError::config(format!(
            "figure size must be one of {SIZES:?}, got {size}"
        )));
    }
    let fig = name.as_str();
    let configs = match name {
        FigureName::Warmstart => [0usize, 1, 2]
            .into_iter()
            .map(|k| {
                let label = if k == 0 { "random".to_string() } else { format!("pi{k}") };
                let mut cfg = base(format!("{fig}_{label}"), size);
                if k > 0 {
                    cfg.warm.kind = WarmKind::PiIterations;
                    cfg.warm.k = k;
                }
                cfg
            })
            .collect(),
        FigureName::Rollout => ROLLOUT_GRID
            .into_iter()
            .map(|m| {
                let mut cfg = base(format!("{fig}_m{m}"), size);
                cfg.ac.m = m;
                cfg
            })
            .collect(),
        FigureName::CriticBias => {
            let mut out: Vec<ExperimentConfig> = BIAS_GRID
                .into_iter()
                .map(|b| {
                    let mut cfg = base(format!("{fig}_b{}", number_label(b)), size);
                    cfg.noise.bias = b;
                    cfg.noise.half_width = NOISE_HALF_WIDTH;
                    cfg
                })
                .collect();
            let mut mix = base(format!("{fig}_mixture"), size);
            mix.noise.bias = MIXTURE_BIAS;
            mix.noise.half_width = NOISE_HALF_WIDTH;
            mix.noise.mixture = true;
            out.push(mix);
            out
        }
        FigureName::ActorPerturb => KEEP_PROB_GRID
            .into_iter()
            .map(|p| {
                let mut cfg = base(format!("{fig}_p{}", number_label(p)), size);
                cfg.noise.actor_keep_prob = p;
                cfg
            })
            .collect(),
    };
    Ok(configs)
}

/// Runs every curve, writing `<dir>/<experiment_id>/` for each and the
/// combined `<dir>/summary.csv`.
pub fn reproduce_figure(
    curves: &[ExperimentConfig],
    dir: Option<&Path>,
    threads: Option<usize>,
) -> Result<Vec<ExperimentOutput>> {
    let mut outputs = Vec::with_capacity(curves.len());
    for cfg in curves {
        let out = run_experiment(cfg, threads)?;
        if let Some(dir) = dir {
            write_experiment(&dir.join(&cfg.experiment_id), &out)?;
        }
        outputs.push(out);
    }
    if let Some(dir) = dir {
        create_dir(dir)?;
        let combined: Vec<_> = outputs.iter().flat_map(|o| o.summary.iter().cloned()).collect();
        write_summary_file(&dir.join("summary.csv"), &combined)?;
    }
    Ok(outputs)
}
