use nalgebra::{DMatrix, DVector};

use super::{budget_terms, check_square, dense_terms, invalid, CompiledModel, ModelError, WeightDecode};
use crate::conic::{ConicProgram, Sense, SolverSettings, Terms};
use crate::estimation::{cholesky, PsdPolicy};

fn direct(program: ConicProgram, n: usize, long_only: bool) -> CompiledModel {
    CompiledModel {
        program,
        decode: WeightDecode::Direct { offset: 0, scale: 1.0 },
        n_assets: n,
        long_only,
    }
}

fn budgeted(n: usize, sense: Sense, long_only: bool) -> ConicProgram {
    let mut p = ConicProgram::new(n, sense);
    p.add_eq(budget_terms(0, n), 1.0);
    if long_only {
        p.set_nonneg(0..n);
    }
    p
}

fn all_vars(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// `min wᵀΣw` subject to `wᵀμ = μ₀` and the budget.
pub fn mv_risk_min(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    mu0: f64,
    long_only: bool,
) -> Result<CompiledModel, ModelError> {
    let n = mu.len();
    check_square(sigma, n, "sigma")?;
    let mut p = budgeted(n, Sense::Minimize, long_only);
    p.add_eq(dense_terms(0, mu.iter().copied()), mu0);
    p.add_quadratic(&all_vars(n), sigma, 1.0);
    Ok(direct(p, n, long_only))
}

/// `max wᵀμ − λ wᵀΣw` subject to the budget.
pub fn mv_risk_aversion(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lambda: f64,
    long_only: bool,
) -> Result<CompiledModel, ModelError> {
    let n = mu.len();
    check_square(sigma, n, "sigma")?;
    if !(lambda >= 0.0) {
        return Err(invalid(format!("risk aversion {lambda} must be non-negative")));
    }
    let mut p = budgeted(n, Sense::Maximize, long_only);
    p.linear_cost = mu.iter().copied().collect();
    p.add_quadratic(&all_vars(n), sigma, lambda);
    Ok(direct(p, n, long_only))
}

/// Box uncertainty on the mean: `max wᵀμ̂ − δᵀ|w| − λ wᵀΣw`.
pub fn mv_box(
    mu_hat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    delta: &DVector<f64>,
    lambda: f64,
    long_only: bool,
) -> Result<CompiledModel, ModelError> {
    let n = mu_hat.len();
    if delta.len() != n {
        return Err(invalid(format!("{} box radii for {n} assets", delta.len())));
    }
    if delta.iter().any(|d| !(*d >= 0.0)) {
        return Err(invalid("box radii must be non-negative"));
    }
    let mut m = mv_risk_aversion(mu_hat, sigma, lambda, long_only)?;
    let p = &mut m.program;
    if long_only {
        for j in 0..n {
            p.linear_cost[j] -= delta[j];
        }
    } else {
        // w = w⁺ − w⁻ with the penalty on w⁺ + w⁻.
        let plus = p.add_vars(n);
        let minus = p.add_vars(n);
        for j in 0..n {
            p.add_eq(vec![(j, 1.0), (plus + j, -1.0), (minus + j, 1.0)], 0.0);
            p.linear_cost[plus + j] = -delta[j];
            p.linear_cost[minus + j] = -delta[j];
        }
        p.set_nonneg(plus..plus + 2 * n);
    }
    Ok(m)
}

/// Ellipsoidal uncertainty on the mean:
/// `max wᵀμ̂ − λ wᵀΣw − δ z` with `Cw = q`, `‖q‖ ≤ z`, `CᵀC = Σ_μ`.
pub fn mv_ellipsoidal(
    mu_hat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    sigma_mu: &DMatrix<f64>,
    delta: f64,
    lambda: f64,
    long_only: bool,
) -> Result<CompiledModel, ModelError> {
    let n = mu_hat.len();
    check_square(sigma_mu, n, "sigma_mu")?;
    if !(delta >= 0.0) {
        return Err(invalid(format!("ellipsoid radius {delta} must be non-negative")));
    }
    let lower = cholesky(sigma_mu, PsdPolicy::Strict)?;
    let mut m = mv_risk_aversion(mu_hat, sigma, lambda, long_only)?;
    let p = &mut m.program;
    let q = p.add_vars(n);
    let z = p.add_vars(1);
    // Row i of C = Lᵀ is column i of L.
    for i in 0..n {
        let mut row: Terms = (i..n).filter(|&j| lower[(j, i)] != 0.0).map(|j| (j, lower[(j, i)])).collect();
        row.push((q + i, -1.0));
        p.add_eq(row, 0.0);
    }
    p.add_soc((0..n).map(|i| vec![(q + i, 1.0)]).collect(), vec![0.0; n], vec![(z, 1.0)], 0.0);
    p.set_lower(z, 0.0);
    p.linear_cost[z] = -delta;
    Ok(m)
}

/// RMu program together with the two single-objective optima it is anchored to.
#[derive(Debug, Clone)]
pub struct RmuModel {
    pub f1_star: f64,
    pub f2_star: f64,
    pub compiled: CompiledModel,
}

/// Bounds `‖Fᵀw‖² ≤ r` for `r = α/η₁ + f₁*`, as the rotated cone
/// `‖(2Fᵀw/√k, r/k − 1)‖ ≤ r/k + 1` with `k` rescaling `r` to order one.
fn add_quadratic_bound(p: &mut ConicProgram, factor: &DMatrix<f64>, n: usize, alpha: usize, eta1: f64, f1: f64) {
    let k = f1.abs().max(1e-12);
    let s = 2.0 / k.sqrt();
    let mut rows: Vec<Terms> = (0..n)
        .map(|i| (i..n).filter(|&j| factor[(j, i)] != 0.0).map(|j| (j, s * factor[(j, i)])).collect())
        .collect();
    let mut offsets = vec![0.0; n];
    rows.push(vec![(alpha, 1.0 / (eta1 * k))]);
    offsets.push(f1 / k - 1.0);
    p.add_soc(rows, offsets, vec![(alpha, 1.0 / (eta1 * k))], f1 / k + 1.0);
}

/// Joint (mean, covariance) uncertainty solved as a Chebyshev scalarization
/// of the robust variance `wᵀ(Σ + (ε/c)I)w` and robust mean `μᵀw − ε‖w‖`.
#[allow(clippy::too_many_arguments)]
pub fn rmu(
    mu_hat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    epsilon: f64,
    c: f64,
    eta1: f64,
    eta2: f64,
    long_only: bool,
    settings: &SolverSettings,
) -> Result<RmuModel, ModelError> {
    let n = mu_hat.len();
    check_square(sigma, n, "sigma")?;
    if !(eta1 > 0.0 && eta2 > 0.0) || (eta1 + eta2 - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("weights η₁={eta1}, η₂={eta2} must be positive and sum to 1")));
    }
    if !(epsilon >= 0.0) || !(c > 0.0) {
        return Err(invalid(format!("need ε ≥ 0 and c > 0, got ε={epsilon}, c={c}")));
    }
    let robust_sigma = sigma + DMatrix::identity(n, n) * (epsilon / c);
    let factor = cholesky(&robust_sigma, PsdPolicy::Strict)?;

    let mut variance = budgeted(n, Sense::Minimize, long_only);
    variance.add_quadratic(&all_vars(n), &robust_sigma, 1.0);
    let (_, s1) = direct(variance, n, long_only).solve(settings)?;
    let f1 = s1.objective;

    let mut ret = budgeted(n, Sense::Maximize, long_only);
    ret.linear_cost = mu_hat.iter().copied().collect();
    let norm = ret.add_vars(1);
    ret.linear_cost[norm] = -epsilon;
    ret.add_soc((0..n).map(|j| vec![(j, 1.0)]).collect(), vec![0.0; n], vec![(norm, 1.0)], 0.0);
    let (_, s2) = direct(ret, n, long_only).solve(settings)?;
    let f2 = s2.objective;

    let mut p = budgeted(n, Sense::Minimize, long_only);
    let alpha = p.add_vars(1);
    let omega = p.add_vars(1);
    p.linear_cost[alpha] = 1.0;
    p.set_lower(alpha, 0.0);
    p.set_lower(omega, 0.0);
    add_quadratic_bound(&mut p, &factor, n, alpha, eta1, f1);
    let mut mean_row = dense_terms(0, mu_hat.iter().copied());
    mean_row.push((alpha, 1.0 / eta2));
    if epsilon != 0.0 {
        mean_row.push((omega, -epsilon));
    }
    p.add_eq(mean_row, f2);
    p.add_soc((0..n).map(|j| vec![(j, 1.0)]).collect(), vec![0.0; n], vec![(omega, 1.0)], 0.0);
    Ok(RmuModel {
        f1_star: f1,
        f2_star: f2,
        compiled: direct(p, n, long_only),
    })
}
