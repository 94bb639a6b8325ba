use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    budget_terms, dense_terms, invalid, CompiledModel, MixtureInput, ModelError, ModelId, Portfolio, ScenarioSet,
    WeightDecode,
};
use crate::conic::{ConicProgram, Sense, SolverSettings, Terms};
use crate::metrics::omega_or_infinite;

/// Per-asset bounds `x̲ ≤ w ≤ x̄` in the Omega program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaBounds {
    /// Scalar bounds applied to every asset.
    pub lower: f64,
    pub upper: f64,
}

impl Default for OmegaBounds {
    fn default() -> Self {
        Self { lower: 0.0, upper: 1.0 }
    }
}

fn scenario_row(set: &ScenarioSet, k: usize, w_offset: usize, scale: f64) -> Terms {
    dense_terms(w_offset, (0..set.n_assets()).map(|j| scale * set.returns[(k, j)]))
}

/// Omega ratio maximization through the Charnes-Cooper transform.
///
/// Variables `(x, v, ζ)`; `w = x / ζ` and the optimal value is `Ω* − 1`.
pub fn omega_lp(set: &ScenarioSet, tau: f64, bounds: &OmegaBounds) -> Result<CompiledModel, ModelError> {
    if !(0.0 <= bounds.lower && bounds.lower <= bounds.upper) {
        return Err(invalid(format!(
            "omega bounds need 0 <= lower <= upper, got [{}, {}]",
            bounds.lower, bounds.upper
        )));
    }
    let n = set.n_assets();
    let s = set.n_scenarios();
    if bounds.lower * n as f64 > 1.0 + 1e-12 || bounds.upper * (n as f64) < 1.0 - 1e-12 {
        return Err(ModelError::Infeasible);
    }
    let means = set.means();
    let mut p = ConicProgram::new(n + s + 1, Sense::Maximize);
    let (x, v, zeta) = (0, n, n + s);
    for j in 0..n {
        p.linear_cost[x + j] = means[j];
    }
    p.linear_cost[zeta] = -tau;
    p.add_eq(dense_terms(v, set.probs.iter().copied()), 1.0);
    let mut excess = dense_terms(x, means.iter().copied());
    excess.push((zeta, -tau));
    p.add_ge(excess, 0.0);
    for k in 0..s {
        let mut row = scenario_row(set, k, x, 1.0);
        row.push((v + k, 1.0));
        if tau != 0.0 {
            row.push((zeta, -tau));
        }
        p.add_ge(row, 0.0);
    }
    let mut budget = budget_terms(x, n);
    budget.push((zeta, -1.0));
    p.add_eq(budget, 0.0);
    for j in 0..n {
        p.add_le(vec![(x + j, 1.0), (zeta, -bounds.upper)], 0.0);
        if bounds.lower > 0.0 {
            p.add_ge(vec![(x + j, 1.0), (zeta, -bounds.lower)], 0.0);
        }
    }
    p.set_nonneg(x..x + n);
    p.set_nonneg(v..v + s);
    p.set_lower(zeta, 0.0);
    Ok(CompiledModel {
        program: p,
        decode: WeightDecode::Fractional {
            x_offset: x,
            zeta_index: zeta,
        },
        n_assets: n,
        long_only: true,
    })
}

/// Scenario CVaR minimization in `(w, ξ, ν)`.
///
/// With `fixed` weights the program evaluates the CVaR of that portfolio.
pub fn cvar_lp(
    set: &ScenarioSet,
    beta: f64,
    phi: Option<f64>,
    fixed: Option<&[f64]>,
    long_only: bool,
) -> Result<CompiledModel, ModelError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("confidence level {beta} outside (0, 1)")));
    }
    let n = set.n_assets();
    let s = set.n_scenarios();
    let mut p = ConicProgram::new(n + 1 + s, Sense::Minimize);
    let (w, xi, nu) = (0, n, n + 1);
    p.linear_cost[xi] = 1.0;
    for k in 0..s {
        p.linear_cost[nu + k] = set.probs[k] / (1.0 - beta);
        let mut row = scenario_row(set, k, w, 1.0);
        row.push((nu + k, 1.0));
        row.push((xi, 1.0));
        p.add_ge(row, 0.0);
    }
    p.set_nonneg(nu..nu + s);
    if let Some(phi) = phi {
        p.add_ge(dense_terms(w, set.means().iter().copied()), phi);
    }
    match fixed {
        Some(weights) => {
            if weights.len() != n {
                return Err(invalid(format!("{} fixed weights for {n} assets", weights.len())));
            }
            for (j, &v) in weights.iter().enumerate() {
                p.set_lower(w + j, v);
                p.set_upper(w + j, v);
            }
        }
        None => {
            p.add_eq(budget_terms(w, n), 1.0);
            if long_only {
                p.set_nonneg(w..w + n);
            }
        }
    }
    Ok(CompiledModel {
        program: p,
        decode: WeightDecode::Direct { offset: w, scale: 1.0 },
        n_assets: n,
        long_only: long_only && fixed.is_none(),
    })
}

/// Worst-case Omega surrogate for a fixed `γ`: maximize the worst component's
/// `γ (mean − τ) − (1 − γ) E[τ − y]⁺`.
pub fn wcor_program(mix: &MixtureInput, tau: f64, gamma: f64, long_only: bool) -> Result<CompiledModel, ModelError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("gamma {gamma} outside [0, 1]")));
    }
    let n = mix.n_assets();
    let mut p = ConicProgram::new(n + 1, Sense::Maximize);
    let theta = n;
    p.linear_cost[theta] = 1.0;
    for comp in &mix.components {
        let s = comp.n_scenarios();
        let u = p.add_vars(s);
        p.set_nonneg(u..u + s);
        let mut row = dense_terms(0, comp.means().iter().map(|m| gamma * m));
        row.extend(dense_terms(u, comp.probs.iter().map(|q| -(1.0 - gamma) * q)));
        row.push((theta, -1.0));
        p.add_ge(row, gamma * tau);
        for k in 0..s {
            let mut short = scenario_row(comp, k, 0, 1.0);
            short.push((u + k, 1.0));
            p.add_ge(short, tau);
        }
    }
    p.add_eq(budget_terms(0, n), 1.0);
    if long_only {
        for j in 0..n {
            p.set_lower(j, 0.0);
            p.set_upper(j, 1.0);
        }
    }
    Ok(CompiledModel {
        program: p,
        decode: WeightDecode::Direct { offset: 0, scale: 1.0 },
        n_assets: n,
        long_only,
    })
}

/// Minimum over components of the empirical Omega ratio of `w`.
///
/// A component with no shortfall below `τ` scores `+∞` (or 1 if its mean is exactly `τ`).
pub fn worst_omega(mix: &MixtureInput, tau: f64, w: &[f64]) -> f64 {
    mix.components
        .iter()
        .map(|c| omega_or_infinite(&c.portfolio_returns(w), &c.probs, tau))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstOmega {
    /// `frontier_param` holds the selected γ.
    pub portfolio: Portfolio,
    pub min_omega: f64,
}

/// Sweeps `γ = 0, step, …, 1`, keeping the candidate whose worst-component
/// Omega strictly improves on the best so far.
pub fn maximize_worst_omega(
    mix: &MixtureInput,
    tau: f64,
    step: f64,
    long_only: bool,
    settings: &SolverSettings,
) -> Result<WorstOmega, ModelError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(invalid(format!("gamma step {step} outside (0, 1]")));
    }
    let count = (1.0 / step + 1e-9).floor() as usize;
    let gammas: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(1.0)).collect();
    let results: Vec<_> = gammas
        .par_iter()
        .map(|&g| wcor_program(mix, tau, g, long_only)?.portfolio(settings, ModelId::Wcor, g))
        .collect();

    let mut best: Option<WorstOmega> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(portfolio) => {
                let score = worst_omega(mix, tau, &portfolio.weights);
                if best.as_ref().is_none_or(|b| score > b.min_omega) {
                    best = Some(WorstOmega {
                        portfolio,
                        min_omega: score,
                    });
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(ModelError::Infeasible))
}

/// Worst-case CVaR over mixture components in `(w, α, θ, u¹…uˡ)`; weights are
/// returned per unit of initial wealth `w₀`.
pub fn wcvar_program(
    mix: &MixtureInput,
    beta: f64,
    phi: Option<f64>,
    w0: f64,
    long_only: bool,
) -> Result<CompiledModel, ModelError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("confidence level {beta} outside (0, 1)")));
    }
    if !(w0 > 0.0) {
        return Err(invalid(format!("initial wealth {w0} must be positive")));
    }
    let n = mix.n_assets();
    let mut p = ConicProgram::new(n + 2, Sense::Minimize);
    let (alpha, theta) = (n, n + 1);
    p.linear_cost[theta] = 1.0;
    for comp in &mix.components {
        let s = comp.n_scenarios();
        let u = p.add_vars(s);
        p.set_nonneg(u..u + s);
        let mut row = dense_terms(u, comp.probs.iter().map(|q| q / (1.0 - beta)));
        row.push((alpha, 1.0));
        row.push((theta, -1.0));
        p.add_le(row, 0.0);
        for k in 0..s {
            let mut loss = scenario_row(comp, k, 0, 1.0);
            loss.push((u + k, 1.0));
            loss.push((alpha, 1.0));
            p.add_ge(loss, 0.0);
        }
        if let Some(phi) = phi {
            p.add_ge(dense_terms(0, comp.means().iter().copied()), phi);
        }
    }
    p.add_eq(budget_terms(0, n), w0);
    if long_only {
        p.set_nonneg(0..n);
    }
    Ok(CompiledModel {
        program: p,
        decode: WeightDecode::Direct { offset: 0, scale: w0 },
        n_assets: n,
        long_only,
    })
}
