//! Offline error analysis of a stored run: the per-step split of the policy
//! update into critic and actor parts, and the cross-seed bias of the Newton
//! residual.

use std::io::Write;
use std::path::Path;

use wsac_core::linalg::{norm_l2, norm_sup, sub_vec};
use wsac_core::{decompose_perturbation, estimate_bias, newton_residual, AcTrace64, Mdp64};

use crate::error::{HarnessError, Result};
use crate::experiment::{build_mdp, read_json};
use crate::manifest::{read_manifest, trace_path};
use crate::records::format_float;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub seed: u64,
    /// Index of the record the step produced.
    pub iteration: usize,
    pub e_t_l2: f64,
    pub e_c_l2: f64,
    pub e_a_l2: f64,
    pub e_total_l2: f64,
    pub e_total_printed_l2: f64,
    /// `‖v^{π̂} − v^{π_{t+1}} − (E_c + E_a)‖_∞`.
    pub identity_error: f64,
    pub residual_l2: f64,
    pub residual_executed_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub iteration: usize,
    pub n_seeds: usize,
    pub bias_l2: f64,
    pub bias_sup: f64,
    pub noise_trace: Option<f64>,
    pub ci_halfwidth_max: f64,
}

pub fn decompose_trace(mdp: &Mdp64, trace: &AcTrace64) -> Result<Vec<DecompositionRow>> {
    let mut rows = Vec::new();
    for t in 0..trace.records.len().saturating_sub(1) {
        let (cur, next) = (&trace.records[t], &trace.records[t + 1]);
        let pi_tilde = match &next.greedy_policy {
            Some(p) => p.to_stochastic(mdp.n_actions()),
            None => next.executed_policy.clone(),
        };
        let d = decompose_perturbation(mdp, &cur.executed_policy, &pi_tilde, &next.executed_policy)?;
        let res = newton_residual(mdp, trace, t)?;
        let identity = sub_vec(&sub_vec(&d.v_hat, &d.v_newton), &d.e_total);
        rows.push(DecompositionRow {
            seed: trace.seed,
            iteration: t + 1,
            e_t_l2: norm_l2(&d.e_t),
            e_c_l2: norm_l2(&d.e_c),
            e_a_l2: norm_l2(&d.e_a),
            e_total_l2: norm_l2(&d.e_total),
            e_total_printed_l2: norm_l2(&d.e_total_printed),
            identity_error: norm_sup(&identity),
            residual_l2: norm_l2(&res.greedy_jacobian),
            residual_executed_l2: norm_l2(&res.executed_jacobian),
        });
    }
    Ok(rows)
}

pub fn bias_rows(mdp: &Mdp64, traces: &[AcTrace64]) -> Result<Vec<BiasRow>> {
    let len = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let mut rows = Vec::new();
    for t in 0..len.saturating_sub(1) {
        let residuals = traces
            .iter()
            .map(|tr| newton_residual(mdp, tr, t).map(|r| r.greedy_jacobian))
            .collect::<wsac_core::Result<Vec<_>>>()?;
        let est = estimate_bias(&residuals, true)?;
        rows.push(BiasRow {
            iteration: t + 1,
            n_seeds: est.n_seeds,
            bias_l2: norm_l2(&est.bias_hat),
            bias_sup: norm_sup(&est.bias_hat),
            noise_trace: est.noise_cov_trace,
            ci_halfwidth_max: est.ci_halfwidth.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

pub fn write_decomposition<W: Write>(
    out: W,
    id: &str,
    rows: &[DecompositionRow],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment_id",
        "seed",
        "iteration",
        "e_t_l2",
        "e_c_l2",
        "e_a_l2",
        "e_total_l2",
        "e_total_printed_l2",
        "identity_error",
        "residual_l2",
        "residual_executed_l2",
    ])?;
    for r in rows {
        let mut rec = vec![id.to_string(), r.seed.to_string(), r.iteration.to_string()];
        rec.extend(
            [
                r.e_t_l2,
                r.e_c_l2,
                r.e_a_l2,
                r.e_total_l2,
                r.e_total_printed_l2,
                r.identity_error,
                r.residual_l2,
                r.residual_executed_l2,
            ]
            .map(format_float),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bias<W: Write>(out: W, id: &str, rows: &[BiasRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment_id",
        "iteration",
        "n_seeds",
        "bias_l2",
        "bias_sup",
        "noise_trace",
        "ci_halfwidth_max",
    ])?;
    for r in rows {
        w.write_record([
            id.to_string(),
            r.iteration.to_string(),
            r.n_seeds.to_string(),
            format_float(r.bias_l2),
            format_float(r.bias_sup),
            r.noise_trace.map(format_float).unwrap_or_default(),
            format_float(r.ci_halfwidth_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `<run>/manifest.json` and the stored traces, then writes
/// `decomposition.csv` and `bias.csv` into `out`.
pub fn decompose_run(run: &Path, out: &Path) -> Result<(Vec<DecompositionRow>, Vec<BiasRow>)> {
    let manifest = read_manifest(run)?;
    let cfg = &manifest.config;
    let mdp = build_mdp(&cfg.mdp)?;
    let mut traces = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let path = trace_path(run, seed);
        if !path.exists() {
            return Err(HarnessError::config(format!(
                "{} is missing; rerun with output.traces = true",
                path.display()
            )));
        }
        traces.push(read_json::<AcTrace64>(&path)?);
    }
    let mut decomposition = Vec::new();
    for tr in &traces {
        decomposition.extend(decompose_trace(&mdp, tr)?);
    }
    let bias = bias_rows(&mdp, &traces)?;
    crate::manifest::create_dir(out)?;
    let write = |name: &str, f: &dyn Fn(std::fs::File) -> std::result::Result<(), csv::Error>| -> Result<()> {
        let path = out.join(name);
        let file = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        f(file).map_err(|e| HarnessError::Parse {
            path: path.clone(),
            line: 0,
            message: e.to_string(),
        })
    };
    write("decomposition.csv", &|f| {
        write_decomposition(f, &cfg.experiment_id, &decomposition)
    })?;
    write("bias.csv", &|f| write_bias(f, &cfg.experiment_id, &bias))?;
    Ok((decomposition, bias))
}
