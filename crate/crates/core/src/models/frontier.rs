use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    cvar_lp, invalid, maximize_worst_omega, mv_box, mv_ellipsoidal, mv_risk_aversion, mv_risk_min, omega_lp, rmu,
    wcvar_program, ModelConfig, ModelError, ModelId, ModelInputs, Portfolio,
};

/// A frontier point that could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierWarning {
    pub index: usize,
    pub param: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub model: ModelId,
    /// Successful points in grid order.
    pub portfolios: Vec<Portfolio>,
    pub warnings: Vec<FrontierWarning>,
}

/// Geometric grid over `[lo, hi]`; a single point sits at 1.
pub fn lambda_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// Linear grid over `[lo, hi]`; a single point sits at `lo`.
fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Frontier parameter grid of a model. Single-portfolio models get one entry.
fn grid(model: ModelId, inputs: &ModelInputs, cfg: &ModelConfig, n: usize) -> Vec<f64> {
    match model {
        ModelId::Mv | ModelId::MvBu | ModelId::MvEu => lambda_grid(cfg.lambda_min, cfg.lambda_max, n),
        ModelId::MvRiskMin => {
            let (lo, hi) = min_max(inputs.estimates.mu_hat.iter().copied());
            linear_grid(lo, hi, n)
        }
        ModelId::RMu => (0..n).map(|k| (k + 1) as f64 / (n + 1) as f64).collect(),
        ModelId::Cvar => {
            let (lo, hi) = min_max(inputs.scenarios.means().iter().copied());
            linear_grid(lo, hi, n)
        }
        ModelId::Wcvar => {
            // Asset-wise worst component mean keeps every grid point attainable.
            let comp_means: Vec<_> = inputs.mixture.components.iter().map(|c| c.means()).collect();
            let worst = (0..inputs.n_assets()).map(|j| comp_means.iter().map(|m| m[j]).fold(f64::INFINITY, f64::min));
            let (lo, hi) = min_max(worst);
            linear_grid(lo, hi, n)
        }
        ModelId::Or => vec![cfg.tau],
        ModelId::Wcor => vec![cfg.gamma_step],
    }
}

fn solve_point(model: ModelId, inputs: &ModelInputs, cfg: &ModelConfig, param: f64) -> Result<Portfolio, ModelError> {
    let est = &inputs.estimates;
    let lo = cfg.long_only;
    let s = &cfg.solver;
    match model {
        ModelId::Mv => mv_risk_aversion(&est.mu_hat, &est.sigma, param, lo)?.portfolio(s, model, param),
        ModelId::MvRiskMin => mv_risk_min(&est.mu_hat, &est.sigma, param, lo)?.portfolio(s, model, param),
        ModelId::MvBu => mv_box(&est.mu_hat, &est.sigma, &est.box_delta, param, lo)?.portfolio(s, model, param),
        ModelId::MvEu => mv_ellipsoidal(&est.mu_hat, &est.sigma, &est.sigma_mu, est.ellipsoid_delta, param, lo)?
            .portfolio(s, model, param),
        ModelId::RMu => rmu(&est.mu_hat, &est.sigma, est.epsilon, cfg.rmu_c, param, 1.0 - param, lo, s)?
            .compiled
            .portfolio(s, model, param),
        ModelId::Cvar => {
            cvar_lp(&inputs.scenarios, cfg.cvar_beta, Some(param), None, lo)?.portfolio(s, model, param)
        }
        ModelId::Wcvar => {
            wcvar_program(&inputs.mixture, cfg.cvar_beta, Some(param), cfg.w0, lo)?.portfolio(s, model, param)
        }
        ModelId::Or => omega_lp(&inputs.scenarios, cfg.tau, &cfg.omega_bounds)?.portfolio(s, model, param),
        ModelId::Wcor => Ok(maximize_worst_omega(&inputs.mixture, cfg.tau, cfg.gamma_step, lo, s)?.portfolio),
    }
}

/// Solves every grid point of `model`, keeping failures as warnings.
pub fn efficient_frontier(
    model: ModelId,
    inputs: &ModelInputs,
    cfg: &ModelConfig,
    n_points: usize,
) -> Result<Frontier, ModelError> {
    if n_points == 0 {
        return Err(invalid("a frontier needs at least one point"));
    }
    let params = grid(model, inputs, cfg, n_points);
    let results: Vec<_> = params
        .par_iter()
        .map(|&param| solve_point(model, inputs, cfg, param))
        .collect();
    let mut frontier = Frontier {
        model,
        portfolios: Vec::new(),
        warnings: Vec::new(),
    };
    for (index, (param, r)) in params.iter().zip(results).enumerate() {
        match r {
            Ok(mut p) => {
                p.grid_index = index;
                frontier.portfolios.push(p);
            }
            Err(e) => {
                log::warn!("{model} point {index} (param {param}): {e}");
                frontier.warnings.push(FrontierWarning {
                    index,
                    param: *param,
                    reason: e.to_string(),
                });
            }
        }
    }
    if frontier.portfolios.is_empty() {
        return Err(ModelError::AllPointsFailed {
            model,
            first: frontier.warnings[0].reason.clone(),
        });
    }
    Ok(frontier)
}
