//! Experiment configuration: a TOML file with flat dotted keys
//! (`ac.m = 50`), plus `key=value` overrides applied on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use wsac_core::ac::{AcConfig, CriticNoise, ErrorSpec};
use wsac_core::gridworld::GridLayout;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpKind {
    #[default]
    Gridworld,
    /// JSON MDP file.
    File,
    /// Dense random MDP.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpSpec {
    pub kind: MdpKind,
    /// Canonical gridworld size, ignored when `layout` is given.
    pub size: usize,
    pub gamma: f64,
    pub absorbing_goal: bool,
    pub layout: Option<GridLayout>,
    pub path: Option<PathBuf>,
    pub states: usize,
    pub actions: usize,
    pub seed: u64,
}

impl Default for MdpSpec {
    fn default() -> Self {
        Self {
            kind: MdpKind::Gridworld,
            size: 10,
            gamma: 0.9,
            absorbing_goal: false,
            layout: None,
            path: None,
            states: 10,
            actions: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmKind {
    /// Start from the random policy chosen by `warm.random`.
    #[default]
    None,
    /// `k` exact policy-iteration steps from a random policy.
    PiIterations,
    /// Policy read from a JSON file.
    PolicyFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomInit {
    /// The uniformly random policy, which is also the zero-logit softmax actor.
    #[default]
    Uniform,
    /// Each state's action distribution drawn uniformly from the simplex.
    Stochastic,
    /// One uniformly chosen action per state.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmSpec {
    pub kind: WarmKind,
    pub k: usize,
    pub random: RandomInit,
    pub path: Option<PathBuf>,
}

impl Default for WarmSpec {
    fn default() -> Self {
        Self {
            kind: WarmKind::None,
            k: 0,
            random: RandomInit::Uniform,
            path: None,
        }
    }
}

/// Injected errors: critic noise `e(t) = b + U[−w, w]` per state (sign of `b`
/// redrawn each iteration when `mixture`), and actor keep-probability `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub bias: f64,
    pub half_width: f64,
    pub mixture: bool,
    pub actor_keep_prob: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            bias: 0.0,
            half_width: 0.0,
            mixture: false,
            actor_keep_prob: 1.0,
        }
    }
}

impl NoiseSpec {
    pub fn to_error_spec(&self) -> ErrorSpec<f64> {
        ErrorSpec {
            critic_noise: CriticNoise {
                bias: self.bias,
                half_width: self.half_width,
                mixture: self.mixture,
            },
            actor_keep_prob: self.actor_keep_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Fill `bias_l2` / `noise_trace` from the cross-seed residual estimate.
    pub bias: bool,
    /// Record wall-clock time in `wall_ms`; off by default so output is reproducible.
    pub timing: bool,
    /// Write each seed's full trace as JSON (needed by `decompose`).
    pub traces: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            bias: true,
            timing: false,
            traces: false,
        }
    }
}

fn default_iterations() -> usize {
    50
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mdp: MdpSpec,
    #[serde(default)]
    pub warm: WarmSpec,
    #[serde(default)]
    pub ac: AcConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn new(experiment_id: impl Into<String>) -> Self {
        Self {
            experiment_id: experiment_id.into(),
            iterations: default_iterations(),
            seeds: default_seeds(),
            output_dir: None,
            mdp: MdpSpec::default(),
            warm: WarmSpec::default(),
            ac: AcConfig::default(),
            noise: NoiseSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment_id.is_empty() || self.experiment_id.contains(['/', '\\', ',', '"', '\n']) {
            return Err(HarnessError::config(format!(
                "experiment_id must be non-empty without path separators, commas or quotes, got {:?}",
                self.experiment_id
            )));
        }
        if self.iterations == 0 {
            return Err(HarnessError::config("iterations must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds must be non-empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::config("seeds must be distinct"));
        }
        if !(self.mdp.gamma > 0.0 && self.mdp.gamma < 1.0) {
            return Err(HarnessError::config(format!(
                "mdp.gamma must lie in (0, 1), got {}",
                self.mdp.gamma
            )));
        }
        match self.mdp.kind {
            MdpKind::File if self.mdp.path.is_none() => {
                return Err(HarnessError::config("mdp.path is required when mdp.kind = \"file\""));
            }
            MdpKind::Random if self.mdp.states == 0 || self.mdp.actions == 0 => {
                return Err(HarnessError::config("mdp.states and mdp.actions must be positive"));
            }
            _ => {}
        }
        if self.warm.kind == WarmKind::PolicyFile && self.warm.path.is_none() {
            return Err(HarnessError::config(
                "warm.path is required when warm.kind = \"policy_file\"",
            ));
        }
        self.ac.validate()?;
        self.noise.to_error_spec().validate()?;
        Ok(())
    }
}

/// Flattens nested tables into dotted keys. Arrays and scalars are leaves.
pub fn flatten(table: &Table) -> BTreeMap<String, Value> {
    fn walk(prefix: &str, table: &Table, out: &mut BTreeMap<String, Value>) {
        for (k, v) in table {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match v {
                Value::Table(t) if !t.is_empty() => walk(&key, t, out),
                _ => {
                    out.insert(key, v.clone());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk("", table, &mut out);
    out
}

pub fn unflatten(flat: &BTreeMap<String, Value>) -> Result<Table> {
    let mut root = Table::new();
    for (key, value) in flat {
        let parts: Vec<&str> = key.split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            node = match entry {
                Value::Table(t) => t,
                _ => {
                    return Err(HarnessError::config(format!(
                        "key {key:?} nests under a non-table value"
                    )))
                }
            };
        }
        node.insert(parts[parts.len() - 1].to_string(), value.clone());
    }
    Ok(root)
}

/// Parses `key=value`. The value is read as a TOML literal when possible
/// (`3`, `0.5`, `true`, `[1, 2]`, `"x"`) and as a bare string otherwise.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| HarnessError::config(format!("override {text:?} is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(HarnessError::config(format!(
            "override {text:?} has an empty key segment"
        )));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

pub fn apply_overrides(flat: &mut BTreeMap<String, Value>, overrides: &[String]) -> Result<()> {
    for text in overrides {
        let (key, value) = parse_override(text)?;
        let nested = format!("{key}.");
        flat.retain(|k, _| !k.starts_with(&nested));
        flat.insert(key, value);
    }
    Ok(())
}

fn decode<T: DeserializeOwned>(table: Table, origin: &str) -> Result<T> {
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::config(format!("{origin}: {}", e.message())))
}

/// Parses TOML text, applies overrides, and decodes into `T`.
pub fn resolve<T: DeserializeOwned>(text: &str, overrides: &[String], origin: &str) -> Result<T> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| HarnessError::config(format!("{origin}: {e}")))?;
    let mut flat = flatten(&table);
    apply_overrides(&mut flat, overrides)?;
    decode(unflatten(&flat)?, origin)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub fn load_experiment(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = resolve(&read_text(path)?, overrides, &path.display().to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

/// Re-applies overrides to an already built config.
pub fn override_experiment(cfg: &ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig> {
    if overrides.is_empty() {
        return Ok(cfg.clone());
    }
    let table = Table::try_from(cfg).map_err(|e| HarnessError::config(e.to_string()))?;
    let mut flat = flatten(&table);
    apply_overrides(&mut flat, overrides)?;
    let out: ExperimentConfig = decode(unflatten(&flat)?, "override")?;
    out.validate()?;
    Ok(out)
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| HarnessError::config(format!("invalid seed {s:?} in --seeds")))
        })
        .collect()
}
