//! Evaluation of the bound calculators from a config file, flattened to
//! `(name, inputs_hash, value)` rows.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wsac_core::bounds::{
    actor_error_bound, bernstein_tail, bias_and_upper_bounds, critic_error_bound_complete, critic_error_bound_with,
};
use wsac_core::BoundConstants;

use crate::error::{HarnessError, Result};
use crate::manifest::config_hash;
use crate::records::format_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calculator {
    /// κ, σ, L₀, L, Υ, Ξ_p.
    Derived,
    /// Main-text `r̃_m` and `ε_p`.
    Critic,
    /// `ε_p` with the δ₁, δ₂ terms.
    CriticComplete,
    Actor,
    /// `H_t`, `L_b·H_t` and the three recursions.
    Upper,
    Bernstein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernsteinInputs {
    pub n: u64,
    pub eps: f64,
    pub sigma2: f64,
    pub c: f64,
    pub lambda_r: f64,
}

fn default_calculators() -> Vec<Calculator> {
    vec![
        Calculator::Derived,
        Calculator::Critic,
        Calculator::Actor,
        Calculator::Upper,
    ]
}

fn one() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_calculators")]
    pub calculators: Vec<Calculator>,
    #[serde(default)]
    pub constants: BoundConstants,
    /// Replace `ln p` by `|ln p|` in `r̃_m` (not the printed form).
    #[serde(default)]
    pub abs_log: bool,
    #[serde(default = "one")]
    pub gap0: f64,
    /// Previous-iterate gap fed to the actor bound; defaults to `gap0`.
    #[serde(default)]
    pub gap_prev: Option<f64>,
    #[serde(default = "ten")]
    pub horizon: usize,
    #[serde(default)]
    pub bernstein: Option<BernsteinInputs>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            calculators: default_calculators(),
            constants: BoundConstants::default(),
            abs_log: false,
            gap0: 1.0,
            gap_prev: None,
            horizon: 10,
            bernstein: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub name: String,
    pub inputs_hash: String,
    pub value: f64,
}

fn series(out: &mut Vec<(String, f64)>, name: &str, values: &[f64]) {
    for (t, v) in values.iter().enumerate() {
        out.push((format!("{name}[{t}]"), *v));
    }
}

pub fn evaluate(cfg: &BoundsConfig) -> Result<Vec<BoundRow>> {
    let c = &cfg.constants;
    c.validate()?;
    let mut vals: Vec<(String, f64)> = Vec::new();
    for calc in &cfg.calculators {
        match calc {
            Calculator::Derived => {
                vals.push(("kappa".into(), c.kappa()));
                vals.push(("sigma".into(), c.sigma()));
                vals.push(("l0".into(), c.l0()));
                vals.push(("l_newton".into(), c.l_newton()));
                vals.push(("upsilon".into(), c.upsilon()));
                vals.push(("xi_p".into(), c.xi_p()?));
            }
            Calculator::Critic => {
                let b = critic_error_bound_with(c, cfg.abs_log)?;
                vals.push(("r_tilde_m".into(), b.r_tilde_m));
                vals.push(("eps_p".into(), b.eps_p));
            }
            Calculator::CriticComplete => {
                vals.push((
                    "eps_p_complete".into(),
                    critic_error_bound_complete(c, cfg.abs_log)?.eps_p,
                ));
            }
            Calculator::Actor => {
                let gap_prev = cfg.gap_prev.unwrap_or(cfg.gap0);
                vals.push(("actor_error_bound".into(), actor_error_bound(c, gap_prev)?));
            }
            Calculator::Upper => {
                let s = bias_and_upper_bounds(c, cfg.gap0, cfg.horizon)?;
                series(&mut vals, "h", &s.h);
                series(&mut vals, "bias_bound", &s.bias_bound);
                series(&mut vals, "unbiased", &s.unbiased);
                series(&mut vals, "biased", &s.biased);
                series(&mut vals, "u", &s.u);
            }
            Calculator::Bernstein => {
                let b = cfg
                    .bernstein
                    .as_ref()
                    .ok_or_else(|| HarnessError::config("the bernstein calculator needs a [bernstein] table"))?;
                vals.push((
                    "bernstein_tail".into(),
                    bernstein_tail(b.n, b.eps, b.sigma2, b.c, b.lambda_r)?,
                ));
            }
        }
    }
    let hash = config_hash(cfg);
    Ok(vals
        .into_iter()
        .map(|(name, value)| BoundRow {
            name,
            inputs_hash: hash.clone(),
            value,
        })
        .collect())
}

pub fn write_rows<W: Write>(out: W, rows: &[BoundRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "inputs_hash", "value"])?;
    for r in rows {
        w.write_record([r.name.as_str(), r.inputs_hash.as_str(), &format_float(r.value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path, overrides: &[String]) -> Result<BoundsConfig> {
    crate::config::resolve(&crate::config::read_text(path)?, overrides, &path.display().to_string())
}
