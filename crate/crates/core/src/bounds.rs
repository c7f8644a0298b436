//! Closed-form bound calculators and a validator that compares bound series
//! with empirical ones.
//!
//! The calculators follow the displayed formulas literally. Radicands and log
//! arguments are checked and reported as [`Error::FormulaDomain`] instead of
//! being clamped.

use serde::{Deserialize, Serialize};

use crate::ac::softmax_constants;
use crate::dp::solve_optimal;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm_l2, norm_sup, Matrix};
use crate::mdp::{induce_policy_matrices, policy_value, Mdp, StochasticPolicy};
use crate::scalar::Scalar;

/// Scalar inputs shared by the calculators. Derived quantities (κ, σ, L₀,
/// Υ, Ξ_p, L) are methods so they cannot drift from their definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConstants {
    /// Critic sample size `N`.
    pub n_samples: u64,
    pub m: u32,
    /// Actor rollout length `l`.
    pub rollout: u32,
    /// Actor steps `N_a`.
    pub actor_steps: u32,
    /// Failure probability `p`.
    pub p: f64,
    /// Feature dimension `d`.
    pub d: u32,
    /// Critic radius `R`.
    pub radius: f64,
    pub r_max: f64,
    /// Stationary mean reward, used only by the appendix form of ε_p.
    pub r_bar: f64,
    pub sigma_star: f64,
    pub gamma: f64,
    /// Spectral bound of Assumption 3; consumed by `r̃_m`.
    pub lambda: f64,
    /// Rightmost non-unit spectral value; consumed by `bernstein_tail` callers.
    pub lambda_r: f64,
    pub alpha: f64,
    pub q_max: f64,
    pub c_psi: f64,
    pub l_psi: f64,
    pub c_pi: f64,
    pub mu: f64,
    /// Overrides the computed critic error when set.
    pub eps_p: Option<f64>,
    pub l_b: f64,
    pub l_j: f64,
    /// Bound on `‖J⁻¹‖` (the constant `M`).
    pub m_jac: f64,
    pub q: f64,
    /// `h(ω, θ*) − h(ω, θ₀)`.
    pub h_gap0: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        let sc = softmax_constants(1.0);
        let gamma = 0.9;
        let r_max = 1.0;
        Self {
            n_samples: 1000,
            m: 10,
            rollout: 100,
            actor_steps: 10,
            p: 0.05,
            d: 16,
            radius: 10.0,
            r_max,
            r_bar: 0.0,
            sigma_star: 0.5,
            gamma,
            lambda: 0.0,
            lambda_r: 0.0,
            alpha: 0.01,
            q_max: r_max / (1.0 - gamma),
            c_psi: sc.c_psi,
            l_psi: sc.l_psi,
            c_pi: sc.c_pi,
            mu: 0.5,
            eps_p: None,
            l_b: 1.0,
            l_j: 1.0,
            m_jac: 1.0,
            q: 1.0,
            h_gap0: 1.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn radical(formula: &'static str, term: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value.sqrt())
    } else {
        Err(Error::FormulaDomain { formula, term, value })
    }
}

fn log_of(formula: &'static str, term: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value.ln())
    } else {
        Err(Error::FormulaDomain { formula, term, value })
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.n_samples == 0 || self.m == 0 || self.d == 0 {
            return Err(Error::config("n_samples, m and d must be at least 1"));
        }
        for (name, v) in [
            ("radius", self.radius),
            ("r_max", self.r_max),
            ("sigma_star", self.sigma_star),
            ("alpha", self.alpha),
            ("q_max", self.q_max),
            ("c_psi", self.c_psi),
            ("l_psi", self.l_psi),
            ("c_pi", self.c_pi),
            ("l_b", self.l_b),
            ("l_j", self.l_j),
            ("m_jac", self.m_jac),
            ("q", self.q),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [("lambda", self.lambda), ("lambda_r", self.lambda_r)] {
            if !(v > -1.0 && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (-1, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.c_psi * self.r_max / (1.0 - self.gamma)
    }

    pub fn sigma(&self) -> f64 {
        3.0 * self.kappa()
    }

    /// Smoothness constant `L₀ = Q_max·L_ψ` of the actor objective.
    pub fn l0(&self) -> f64 {
        self.q_max * self.l_psi
    }

    /// `L = M·L_J` from the local Lipschitz assumption.
    pub fn l_newton(&self) -> f64 {
        self.m_jac * self.l_j
    }

    pub fn upsilon(&self) -> f64 {
        (1.0 - self.alpha * self.mu).powi(self.actor_steps as i32)
    }

    /// `ε_p`, either the override or the main-text critic bound.
    pub fn eps_p(&self) -> Result<f64> {
        match self.eps_p {
            Some(e) => Ok(e),
            None => Ok(critic_error_bound(self)?.eps_p),
        }
    }

    pub fn xi_p(&self) -> Result<f64> {
        positive("mu", self.mu)?;
        let eps = self.eps_p()?;
        let a = self.c_psi * eps + 2.0 * self.kappa();
        let s = self.sigma();
        Ok((a * a + 2.0 * self.alpha * self.l0() * s * s) / (2.0 * self.mu))
    }
}

/// `α₁(λ) = (1+λ)/(1−λ)`.
pub fn alpha1(lambda: f64) -> f64 {
    (1.0 + lambda) / (1.0 - lambda)
}

/// `α₂(0) = 1/3`, otherwise `5/(1−λ)`.
pub fn alpha2(lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0 / 3.0
    } else {
        5.0 / (1.0 - lambda)
    }
}

pub fn alpha3(lambda: f64) -> f64 {
    lambda.max(0.0)
}

/// Tail bound on `P((1/n)Σ f(X_i) − E f > ε)` for a stationary chain.
pub fn bernstein_tail(n: u64, eps: f64, sigma2: f64, c: f64, lambda_r: f64) -> Result<f64> {
    if !(eps >= 0.0) || !(sigma2 >= 0.0) || !(c > 0.0) || !(lambda_r > -1.0 && lambda_r < 1.0) {
        return Err(Error::config(format!(
            "bernstein_tail needs eps >= 0, sigma2 >= 0, c > 0, lambda_r in (-1, 1); got {eps}, {sigma2}, {c}, {lambda_r}"
        )));
    }
    let lp = lambda_r.max(0.0);
    let num = n as f64 * eps * eps / 2.0;
    if num == 0.0 {
        return Ok(1.0);
    }
    let den = alpha1(lp) * sigma2 + alpha2(lp) * c * eps;
    Ok((-num / den).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticBound {
    pub r_tilde_m: f64,
    pub eps_p: f64,
}

/// `r̃_m` as displayed, with `α_i` evaluated at `λ⁺ = max(λ, 0)`.
/// With `abs_log` the logarithm is replaced by `|ln p|`; this is not the
/// printed form and may hit a negative radicand.
pub fn r_tilde_m(consts: &BoundConstants, abs_log: bool) -> Result<f64> {
    consts.validate()?;
    let lp = consts.lambda.max(0.0);
    let (a1, a2, a3) = (alpha1(lp), alpha2(lp), alpha3(consts.lambda));
    let mut ln_p = log_of("r_tilde_m", "p", consts.p)?;
    if abs_log {
        ln_p = ln_p.abs();
    }
    let m = consts.m as f64;
    let r = consts.r_max;
    let rad = a2 * a2 * r * r * a3 * a3 * ln_p * ln_p - 2.0 * m * a1 * a3 * ln_p;
    let root = radical("r_tilde_m", "radicand", rad)?;
    Ok((root - a2 * a3 * ln_p) / m + r)
}

fn concentration_factor(n: f64, log_term: f64) -> Result<f64> {
    let rad = 4.0 / (9.0 * n * n) * log_term * log_term - 2.0 / n * log_term;
    Ok(-2.0 / (3.0 * n) * log_term + radical("eps_p", "matrix-concentration radicand", rad)?)
}

/// Main-text critic error bound `(r̃_m, ε_p)`.
pub fn critic_error_bound(consts: &BoundConstants) -> Result<CriticBound> {
    critic_error_bound_with(consts, false)
}

pub fn critic_error_bound_with(consts: &BoundConstants, abs_log: bool) -> Result<CriticBound> {
    let r_tilde_m = r_tilde_m(consts, abs_log)?;
    let n = consts.n_samples as f64;
    let g = consts.gamma;
    let lead = 4.0 * ((1.0 - g) * r_tilde_m + g.powi(consts.m as i32) * consts.radius)
        / (n.sqrt() * consts.sigma_star * consts.sigma_star);
    let log_term = log_of("eps_p", "p/(4d)", consts.p / (4.0 * consts.d as f64))?;
    Ok(CriticBound {
        r_tilde_m,
        eps_p: lead * concentration_factor(n, log_term)?,
    })
}

/// Critic bound including the target-concentration terms `δ₁`, `δ₂` that the
/// main-text statement drops. Uses `r_bar`.
pub fn critic_error_bound_complete(consts: &BoundConstants, abs_log: bool) -> Result<CriticBound> {
    let main = critic_error_bound_with(consts, abs_log)?;
    let n = consts.n_samples as f64;
    let g = consts.gamma;
    let gm_r = g.powi(consts.m as i32) * consts.radius;
    let rt = main.r_tilde_m;
    let delta1 = ((1.0 - g) * (rt + consts.r_bar) + 2.0 * gm_r) / n;
    let delta2 = (1.0 - g) / n * (consts.r_max + gm_r) * (rt - consts.r_bar).abs();
    let lt = log_of(
        "eps_p_complete",
        "p/(2(d+1))",
        consts.p / (2.0 * (consts.d as f64 + 1.0)),
    )?;
    let rad = delta1 * delta1 / 9.0 * lt * lt - 2.0 * delta2 * lt;
    let extra = -delta1 / (3.0 * consts.sigma_star) * lt + radical("eps_p_complete", "target radicand", rad)?;
    Ok(CriticBound {
        r_tilde_m: rt,
        eps_p: main.eps_p + extra,
    })
}

/// Actor error bound `Υ·gap_prev + Ξ_p`.
pub fn actor_error_bound(consts: &BoundConstants, gap_prev: f64) -> Result<f64> {
    positive("mu", consts.mu)?;
    Ok(consts.upsilon() * gap_prev + consts.xi_p()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundSeries {
    pub h: Vec<f64>,
    /// `L_b·H_t`.
    pub bias_bound: Vec<f64>,
    pub unbiased: Vec<f64>,
    pub biased: Vec<f64>,
    pub u: Vec<f64>,
    /// First `t` at which `gap0^{(1+q)^{1+t}}` left the finite nonzero range;
    /// `u` stops there.
    pub u_truncated_at: Option<usize>,
}

/// `a_{t+1} = L·a_t^{1+q}` for `t = 0..horizon`, returning `horizon + 1` values.
pub fn unbiased_recursion(l: f64, q: f64, a0: f64, horizon: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut a = a0;
    out.push(a);
    for _ in 0..horizon {
        a = l * a.powf(1.0 + q);
        out.push(a);
    }
    out
}

/// `a_{t+1} = L·a_t^{1+q} + b_t`, one value per supplied bias term.
pub fn biased_recursion(l: f64, q: f64, a0: f64, bias: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(bias.len() + 1);
    let mut a = a0;
    out.push(a);
    for b in bias {
        a = l * a.powf(1.0 + q) + b;
        out.push(a);
    }
    out
}

/// `H_t = Σ_{i≤t} Υ^i Ξ_p + Υ^{t+1} h_gap0`.
pub fn h_series(upsilon: f64, xi_p: f64, h_gap0: f64, horizon: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..=horizon)
        .map(|t| {
            acc += upsilon.powi(t as i32) * xi_p;
            acc + upsilon.powi(t as i32 + 1) * h_gap0
        })
        .collect()
}

/// All upper-bound series for `t = 0..=horizon`, starting from `gap0`.
pub fn bias_and_upper_bounds(consts: &BoundConstants, gap0: f64, horizon: usize) -> Result<UpperBoundSeries> {
    let l = consts.l_newton();
    positive("L", l)?;
    positive("q", consts.q)?;
    positive("l_b", consts.l_b)?;
    positive("gap0", gap0)?;
    let h = h_series(consts.upsilon(), consts.xi_p()?, consts.h_gap0, horizon);
    let bias_bound: Vec<f64> = h.iter().map(|x| consts.l_b * x).collect();
    let unbiased = unbiased_recursion(l, consts.q, gap0, horizon);
    let biased = biased_recursion(l, consts.q, gap0, &bias_bound[..horizon]);
    let mut u = Vec::with_capacity(horizon + 1);
    let mut u_truncated_at = None;
    for (t, lbh) in bias_bound.iter().enumerate() {
        let denom = gap0.powf((1.0 + consts.q).powi(t as i32 + 1));
        if !(denom.is_finite() && denom > 0.0) {
            u_truncated_at = Some(t);
            break;
        }
        u.push(lbh / denom);
    }
    Ok(UpperBoundSeries {
        h,
        bias_bound,
        unbiased,
        biased,
        u,
        u_truncated_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LowerBound<T: Scalar> {
    pub vector: Vec<T>,
    pub norm_l2: T,
    pub norm_sup: T,
}

/// Lower bound on the gap after `t + 1` updates, from policies `π₀..π_{t+1}`
/// and biases `B(0..t)`. `P̄_i` is the product of the `i` most recent
/// transition matrices, newest on the left.
pub fn lower_bound<T: Scalar>(
    mdp: &Mdp<T>,
    policies: &[StochasticPolicy<T>],
    bias: &[Vec<T>],
) -> Result<LowerBound<T>> {
    if policies.len() < 2 {
        return Err(Error::config("lower_bound needs at least two policies"));
    }
    check_dim("bias series length", policies.len() - 1, bias.len())?;
    let n = mdp.n_states();
    for b in bias {
        check_dim("bias vector", n, b.len())?;
    }
    let t = bias.len() - 1;
    let g = mdp.gamma();
    let v_star = solve_optimal(mdp)?.v_star;
    let v0 = policy_value(mdp, &policies[0])?;
    let mut out = bias[t].clone();
    let mut prod = Matrix::identity(n);
    let mut gi = T::one();
    for i in 1..=t + 1 {
        let p = induce_policy_matrices(mdp, &policies[t + 2 - i])?.p;
        prod = prod.matmul(&p);
        gi *= g;
        let src: Vec<T> = if i == t + 1 {
            v_star.iter().zip(&v0).map(|(a, b)| *a - *b).collect()
        } else {
            bias[t - i].clone()
        };
        for (o, x) in out.iter_mut().zip(prod.mul_vec(&src)) {
            *o += gi * x;
        }
    }
    Ok(LowerBound {
        norm_l2: norm_l2(&out),
        norm_sup: norm_sup(&out),
        vector: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_indices: usize,
    pub violations: Vec<usize>,
    pub violation_fraction: f64,
    /// Smallest signed margin; negative means a violation.
    pub worst_margin: f64,
    pub margins: Vec<f64>,
}

/// Compares `empirical[seed][index]` with `bound[index]`. An upper bound holds
/// at an index when at most a fraction `p` of seeds exceed it; a lower bound
/// when at most a fraction `p` fall below it.
pub fn validate_bound(empirical: &[Vec<f64>], bound: &[f64], kind: BoundKind, p: f64) -> Result<ValidationReport> {
    if empirical.is_empty() {
        return Err(Error::config("validate_bound needs at least one empirical series"));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("confidence level p must lie in [0, 1), got {p}")));
    }
    for e in empirical {
        check_dim("empirical series", bound.len(), e.len())?;
    }
    let k = empirical.len();
    let j = ((1.0 - p) * k as f64).ceil().max(1.0) as usize;
    let mut margins = Vec::with_capacity(bound.len());
    let mut violations = Vec::new();
    for (i, &b) in bound.iter().enumerate() {
        let mut col: Vec<f64> = empirical.iter().map(|e| e[i]).collect();
        col.sort_by(f64::total_cmp);
        let margin = match kind {
            BoundKind::Upper => b - col[j - 1],
            BoundKind::Lower => col[k - j] - b,
        };
        let margin = if margin.is_nan() { f64::INFINITY } else { margin };
        if margin < 0.0 {
            violations.push(i);
        }
        margins.push(margin);
    }
    let n = bound.len();
    Ok(ValidationReport {
        n_indices: n,
        violation_fraction: if n == 0 {
            0.0
        } else {
            violations.len() as f64 / n as f64
        },
        worst_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        violations,
        margins,
    })
}
