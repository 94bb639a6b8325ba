//! Nominal and robust portfolio models compiled to conic programs.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{solve, ConicError, ConicProgram, Solution, SolveStatus, SolverSettings, Terms};
use crate::estimation::{EstimateSet, EstimationConfig, EstimationError};
use crate::market_data::{partition_mixture, DataError, ReturnsPanel};
use crate::metrics::MetricsError;

mod frontier;
mod mean_variance;
mod scenario;

pub use frontier::{efficient_frontier, lambda_grid, Frontier, FrontierWarning};
pub use mean_variance::{mv_box, mv_ellipsoidal, mv_risk_aversion, mv_risk_min, rmu, RmuModel};
pub use scenario::{
    cvar_lp, maximize_worst_omega, omega_lp, wcor_program, wcvar_program, worst_omega, OmegaBounds,
    WorstOmega,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Program(#[from] ConicError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("program is infeasible")]
    Infeasible,
    #[error("program is unbounded")]
    Unbounded,
    #[error("solver failed: {0}")]
    Numerical(String),
    #[error("fractional transform degenerate: zeta = {0:e}")]
    DegenerateFraction(f64),
    #[error("{model}: every frontier point failed ({first})")]
    AllPointsFailed { model: ModelId, first: String },
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::InvalidInput(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Mv,
    MvRiskMin,
    Or,
    Cvar,
    #[serde(rename = "mvbu")]
    MvBu,
    #[serde(rename = "mveu")]
    MvEu,
    #[serde(rename = "rmu")]
    RMu,
    Wcor,
    Wcvar,
}

impl ModelId {
    pub const ALL: [ModelId; 9] = [
        ModelId::Mv,
        ModelId::MvRiskMin,
        ModelId::Or,
        ModelId::Cvar,
        ModelId::MvBu,
        ModelId::MvEu,
        ModelId::RMu,
        ModelId::Wcor,
        ModelId::Wcvar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Mv => "mv",
            ModelId::MvRiskMin => "mv_risk_min",
            ModelId::Or => "or",
            ModelId::Cvar => "cvar",
            ModelId::MvBu => "mvbu",
            ModelId::MvEu => "mveu",
            ModelId::RMu => "rmu",
            ModelId::Wcor => "wcor",
            ModelId::Wcvar => "wcvar",
        }
    }

    /// Nominal model a robust model is scored against.
    pub fn nominal_counterpart(self) -> Option<ModelId> {
        match self {
            ModelId::MvBu | ModelId::MvEu | ModelId::RMu => Some(ModelId::Mv),
            ModelId::Wcor => Some(ModelId::Or),
            ModelId::Wcvar => Some(ModelId::Cvar),
            _ => None,
        }
    }

    pub fn is_robust(self) -> bool {
        self.nominal_counterpart().is_some()
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                let known: Vec<_> = ModelId::ALL.iter().map(|m| m.name()).collect();
                format!("unknown model `{s}` (expected one of: {})", known.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    pub model: ModelId,
    /// λ, φ, η₁, γ or μ₀ depending on the model.
    pub frontier_param: f64,
    /// Optimal value of the compiled program.
    pub objective: f64,
    /// Position on the frontier grid.
    pub grid_index: usize,
}

/// Equally weighted or probability-weighted scenario matrix (`S × N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub returns: DMatrix<f64>,
    pub probs: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(returns: DMatrix<f64>, probs: Vec<f64>) -> Result<Self, ModelError> {
        if returns.nrows() == 0 || returns.ncols() == 0 {
            return Err(invalid("scenario matrix is empty"));
        }
        if probs.len() != returns.nrows() {
            return Err(invalid(format!(
                "{} probabilities for {} scenarios",
                probs.len(),
                returns.nrows()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("scenario probabilities must be non-negative and sum to 1"));
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite scenario return"));
        }
        Ok(Self { returns, probs })
    }

    pub fn uniform(returns: DMatrix<f64>) -> Result<Self, ModelError> {
        let s = returns.nrows().max(1);
        Self::new(returns, vec![1.0 / s as f64; s])
    }

    pub fn n_scenarios(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    /// Probability-weighted mean return per asset.
    pub fn means(&self) -> DVector<f64> {
        DVector::from_fn(self.n_assets(), |j, _| {
            (0..self.n_scenarios()).map(|k| self.probs[k] * self.returns[(k, j)]).sum()
        })
    }

    /// Portfolio return in every scenario.
    pub fn portfolio_returns(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n_scenarios())
            .map(|k| (0..w.len()).map(|j| self.returns[(k, j)] * w[j]).sum())
            .collect()
    }
}

/// The `l` component distributions of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureInput {
    pub components: Vec<ScenarioSet>,
}

impl MixtureInput {
    pub fn new(components: Vec<ScenarioSet>) -> Result<Self, ModelError> {
        let first = components.first().ok_or_else(|| invalid("mixture needs a component"))?;
        let n = first.n_assets();
        if components.iter().any(|c| c.n_assets() != n) {
            return Err(invalid("mixture components disagree on asset count"));
        }
        Ok(Self { components })
    }

    /// Equiprobable components from consecutive sub-panels.
    pub fn from_panels(panels: &[ReturnsPanel]) -> Result<Self, ModelError> {
        let comps = panels
            .iter()
            .map(|p| ScenarioSet::uniform(p.values().clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(comps)
    }

    pub fn n_assets(&self) -> usize {
        self.components[0].n_assets()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Everything a model may draw on for one estimation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs {
    pub estimates: EstimateSet,
    pub scenarios: ScenarioSet,
    pub mixture: MixtureInput,
}

impl ModelInputs {
    pub fn from_window(
        window: &ReturnsPanel,
        est: &EstimationConfig,
        mixture_parts: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let estimates = EstimateSet::from_window(window, est, seed)?;
        let scenarios = ScenarioSet::uniform(window.values().clone())?;
        let mixture = MixtureInput::from_panels(&partition_mixture(window, mixture_parts)?)?;
        Ok(Self {
            estimates,
            scenarios,
            mixture,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.scenarios.n_assets()
    }
}

/// Model knobs shared by every frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub long_only: bool,
    /// Omega threshold.
    pub tau: f64,
    pub cvar_beta: f64,
    /// Step of the γ sweep in the worst-case Omega search.
    pub gamma_step: f64,
    /// Weight on the covariance deviation in the joint moment set.
    pub rmu_c: f64,
    /// Initial wealth in the worst-case CVaR budget.
    pub w0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub omega_bounds: OmegaBounds,
    pub solver: SolverSettings,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            long_only: true,
            tau: 0.0,
            cvar_beta: 0.95,
            gamma_step: 0.05,
            rmu_c: 1.0,
            w0: 1.0,
            lambda_min: 1e-3,
            lambda_max: 1e3,
            omega_bounds: OmegaBounds::default(),
            solver: model_solver_settings(),
        }
    }
}

/// Tighter than the solver's defaults; scenario LPs carry daily-return magnitudes.
pub fn model_solver_settings() -> SolverSettings {
    SolverSettings {
        feasibility_tol: 1e-9,
        gap_abs_tol: 1e-11,
        gap_rel_tol: 1e-9,
        ..SolverSettings::default()
    }
}

/// How portfolio weights are read off a solution vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightDecode {
    /// `w = x[offset..offset+N] / scale`.
    Direct { offset: usize, scale: f64 },
    /// `w = x[x_offset..] / x[zeta_index]`.
    Fractional { x_offset: usize, zeta_index: usize },
}

/// A compiled program plus the recipe for recovering weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModel {
    pub program: ConicProgram,
    pub decode: WeightDecode,
    pub n_assets: usize,
    pub long_only: bool,
}

/// Smallest denominator accepted by the fractional decode.
pub const ZETA_TOL: f64 = 1e-10;

impl CompiledModel {
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let n = self.n_assets;
        let mut w: Vec<f64> = match self.decode {
            WeightDecode::Direct { offset, scale } => x[offset..offset + n].iter().map(|v| v / scale).collect(),
            WeightDecode::Fractional { x_offset, zeta_index } => {
                let zeta = x[zeta_index];
                if !(zeta > ZETA_TOL) {
                    return Err(ModelError::DegenerateFraction(zeta));
                }
                x[x_offset..x_offset + n].iter().map(|v| v / zeta).collect()
            }
        };
        if self.long_only {
            // Bound violations here are solver round-off only.
            for v in w.iter_mut() {
                *v = v.max(0.0);
            }
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                for v in w.iter_mut() {
                    *v /= total;
                }
            }
        }
        Ok(w)
    }

    /// Solves and decodes; non-optimal statuses become errors.
    pub fn solve(&self, settings: &SolverSettings) -> Result<(Vec<f64>, Solution), ModelError> {
        let sol = solve(&self.program, settings)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(ModelError::Infeasible),
            SolveStatus::Unbounded => return Err(ModelError::Unbounded),
            SolveStatus::NumericalFailure => {
                return Err(ModelError::Numerical(
                    sol.diagnostics.message.clone().unwrap_or_else(|| "no progress".into()),
                ))
            }
        }
        let w = self.weights(&sol.x)?;
        Ok((w, sol))
    }

    pub fn portfolio(
        &self,
        settings: &SolverSettings,
        model: ModelId,
        frontier_param: f64,
    ) -> Result<Portfolio, ModelError> {
        let (weights, sol) = self.solve(settings)?;
        Ok(Portfolio {
            weights,
            model,
            frontier_param,
            objective: sol.objective,
            grid_index: 0,
        })
    }
}

pub(crate) fn check_square(sigma: &DMatrix<f64>, n: usize, what: &str) -> Result<(), ModelError> {
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(invalid(format!(
            "{what} is {}x{}, expected {n}x{n}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn budget_terms(offset: usize, n: usize) -> Terms {
    (offset..offset + n).map(|j| (j, 1.0)).collect()
}

pub(crate) fn dense_terms(offset: usize, coefs: impl IntoIterator<Item = f64>) -> Terms {
    coefs
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v != 0.0)
        .map(|(j, v)| (offset + j, v))
        .collect()
}

#[cfg(test)]
mod tests;
