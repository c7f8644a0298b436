//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wsac_core::dp::solve_optimal;
use wsac_core::mdp::MdpFile;
use wsac_core::Mdp64;

use crate::bounds_cmd;
use crate::config::{self, ExperimentConfig, MdpKind, MdpSpec};
use crate::decompose::decompose_run;
use crate::error::{HarnessError, Result};
use crate::experiment::{build_mdp, run_experiment};
use crate::figures::{figure_configs, reproduce_figure, FigureName};
use crate::manifest::{create_dir, write_experiment, write_json};
use crate::records::summarize_file;

#[derive(Debug, Parser)]
#[command(name = "wsac", version, about = "Warm-start actor-critic experiments on finite MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file with flat dotted keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set ac.m=50`. Repeatable.
    #[arg(long = "set", value_name = "K=V")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Exec {
    /// Comma-separated seed list, replacing the configured seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Worker threads for seed-level parallelism (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an MDP exactly and write `solution.json`.
    Solve {
        #[command(flatten)]
        common: Common,
        /// MDP JSON file; otherwise the config's `mdp.*` keys are used.
        #[arg(long)]
        mdp: Option<PathBuf>,
    },
    /// Run one experiment config.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: Exec,
    },
    /// Run a canned figure sweep.
    Figure {
        /// fig_warmstart, fig_rollout, fig_critic_bias or fig_actor_perturb.
        name: String,
        /// Canonical gridworld size: 10, 15 or 20.
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: Exec,
    },
    /// Evaluate bound calculators into `bounds.csv`.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Error decomposition of a run directory written with `output.traces = true`.
    Decompose {
        /// Run directory containing `manifest.json` and `traces/`.
        #[arg(long)]
        run: PathBuf,
        /// Output directory (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute `summary.csv` from a `runs.csv`.
    Summarize {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// `--out`, else the config's `output_dir`, else `$WSAC_OUT_DIR/<name>`,
/// else `results/<name>`.
pub fn output_dir(flag: Option<&Path>, configured: Option<&Path>, name: &str) -> PathBuf {
    if let Some(p) = flag.or(configured) {
        return p.to_path_buf();
    }
    let root = std::env::var_os("WSAC_OUT_DIR")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"));
    root.join(name)
}

fn load_experiment(common: &Common, exec: &Exec) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| HarnessError::config("--config is required"))?;
    let mut cfg = config::load_experiment(path, &common.overrides)?;
    if let Some(s) = &exec.seeds {
        cfg.seeds = config::parse_seeds(s)?;
        cfg.validate()?;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct Solution {
    gamma: f64,
    iterations: usize,
    residual: f64,
    v_star: Vec<f64>,
    pi_star: Vec<usize>,
}

fn solve(common: &Common, mdp_path: Option<&Path>) -> Result<PathBuf> {
    let spec = match (mdp_path, &common.config) {
        (Some(p), _) => MdpSpec {
            kind: MdpKind::File,
            path: Some(p.to_path_buf()),
            ..MdpSpec::default()
        },
        (None, Some(c)) => config::load_experiment(c, &common.overrides)?.mdp,
        (None, None) => return Err(HarnessError::config("solve needs --mdp FILE or --config")),
    };
    let mdp: Mdp64 = build_mdp(&spec)?;
    let res = solve_optimal(&mdp)?;
    let dir = output_dir(common.out.as_deref(), None, "solve");
    create_dir(&dir)?;
    let sol = Solution {
        gamma: mdp.gamma(),
        iterations: res.iterations,
        residual: res.residual,
        v_star: res.v_star,
        pi_star: res.pi_star.actions().to_vec(),
    };
    write_json(&dir.join("solution.json"), &sol)?;
    if mdp_path.is_none() {
        write_json(&dir.join("mdp.json"), &MdpFile::from(mdp))?;
    }
    Ok(dir)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { common, mdp } => {
            let dir = solve(&common, mdp.as_deref())?;
            println!("wrote {}", dir.join("solution.json").display());
        }
        Command::Run { common, exec } => {
            let cfg = load_experiment(&common, &exec)?;
            let out = run_experiment(&cfg, exec.threads)?;
            let dir = output_dir(common.out.as_deref(), cfg.output_dir.as_deref(), &cfg.experiment_id);
            let manifest = write_experiment(&dir, &out)?;
            println!(
                "wrote {} ({} rows, config {})",
                dir.display(),
                out.records.len(),
                &manifest.config_hash[..12]
            );
        }
        Command::Figure {
            name,
            size,
            common,
            exec,
        } => {
            let fig: FigureName = name.parse()?;
            if common.config.is_some() {
                return Err(HarnessError::config("figure takes --set overrides, not --config"));
            }
            let mut overrides = common.overrides.clone();
            if let Some(s) = &exec.seeds {
                let seeds = config::parse_seeds(s)?;
                overrides.push(format!("seeds={seeds:?}"));
            }
            let curves = figure_configs(fig, size)?
                .iter()
                .map(|c| config::override_experiment(c, &overrides))
                .collect::<Result<Vec<_>>>()?;
            let dir = output_dir(common.out.as_deref(), None, fig.as_str());
            reproduce_figure(&curves, Some(&dir), exec.threads)?;
            println!("wrote {} ({} curves)", dir.display(), curves.len());
        }
        Command::Bounds { common } => {
            let cfg = match &common.config {
                Some(p) => bounds_cmd::load(p, &common.overrides)?,
                None => config::resolve("", &common.overrides, "--set")?,
            };
            let rows = bounds_cmd::evaluate(&cfg)?;
            let dir = output_dir(common.out.as_deref(), None, "bounds");
            create_dir(&dir)?;
            let path = dir.join("bounds.csv");
            let file = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            bounds_cmd::write_rows(file, &rows).map_err(|e| HarnessError::Parse {
                path: path.clone(),
                line: 0,
                message: e.to_string(),
            })?;
            println!("wrote {} ({} values)", path.display(), rows.len());
        }
        Command::Decompose { run, out } => {
            let dir = out.unwrap_or_else(|| run.clone());
            let (d, b) = decompose_run(&run, &dir)?;
            println!("wrote {} ({} steps, {} bias rows)", dir.display(), d.len(), b.len());
        }
        Command::Summarize { runs, out } => {
            let rows = summarize_file(&runs, &out)?;
            println!("wrote {} ({} rows)", out.display(), rows.len());
        }
    }
    Ok(())
}
