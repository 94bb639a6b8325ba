//! Performance and composition measures of a portfolio return stream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty return series")]
    EmptySeries,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative quadratic form {0}")]
    NegativeVariance(f64),
    #[error("standard deviation is zero")]
    ZeroStd,
    #[error("downside deviation is zero: no returns below zero")]
    ZeroDownside,
    #[error("omega denominator is zero: no returns below the threshold {0}")]
    NoLosses(f64),
    #[error("confidence level {0} outside (0, 1)")]
    InvalidBeta(f64),
    #[error("asset threshold {0} must be non-negative")]
    InvalidThreshold(f64),
    #[error("probabilities must be non-negative and sum to one")]
    InvalidProbabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Omega threshold.
    pub tau: f64,
    /// CVaR confidence levels.
    pub betas: Vec<f64>,
    /// Risk-free rate per period, subtracted in the Sharpe ratio.
    pub rf: f64,
    /// Weights with magnitude above this count as held.
    pub asset_epsilon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            tau: 0.0,
            betas: vec![0.90, 0.95, 0.99],
            rf: 0.0,
            asset_epsilon: 1e-6,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if let Some(&b) = self.betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(MetricsError::InvalidBeta(b));
        }
        if !(self.asset_epsilon >= 0.0) {
            return Err(MetricsError::InvalidThreshold(self.asset_epsilon));
        }
        Ok(())
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), MetricsError> {
    if expected != got {
        return Err(MetricsError::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn mean_return(rbar: &[f64], w: &[f64]) -> Result<f64, MetricsError> {
    check_len(rbar.len(), w.len())?;
    Ok(rbar.iter().zip(w).map(|(r, x)| r * x).sum())
}

pub fn std_dev(sigma: &DMatrix<f64>, w: &[f64]) -> Result<f64, MetricsError> {
    check_len(sigma.nrows(), w.len())?;
    check_len(sigma.ncols(), w.len())?;
    let wv = DVector::from_column_slice(w);
    let q = wv.dot(&(sigma * &wv));
    if q < -1e-10 {
        return Err(MetricsError::NegativeVariance(q));
    }
    Ok(q.max(0.0).sqrt())
}

pub fn sharpe(mu_hat: f64, sigma_hat: f64, rf: f64) -> Result<f64, MetricsError> {
    if sigma_hat == 0.0 {
        return Err(MetricsError::ZeroStd);
    }
    Ok((mu_hat - rf) / sigma_hat)
}

/// Sample standard deviation (divisor `S − 1`) of a return stream; zero for one observation.
pub fn series_std(returns: &[f64]) -> Result<f64, MetricsError> {
    if returns.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if returns.len() == 1 {
        return Ok(0.0);
    }
    let m = mean(returns);
    let ss: f64 = returns.iter().map(|r| (r - m) * (r - m)).sum();
    Ok((ss / (returns.len() - 1) as f64).sqrt())
}

/// Mean over the population standard deviation of `max(0, −r)`.
pub fn sortino(returns: &[f64]) -> Result<f64, MetricsError> {
    if returns.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let downside: Vec<f64> = returns.iter().map(|r| (-r).max(0.0)).collect();
    let dm = mean(&downside);
    let var = downside.iter().map(|d| (d - dm) * (d - dm)).sum::<f64>() / downside.len() as f64;
    let dd = var.sqrt();
    if dd == 0.0 {
        return Err(MetricsError::ZeroDownside);
    }
    Ok(mean(returns) / dd)
}

/// [`sortino`] on the portfolio stream `R w`.
pub fn sortino_panel(returns: &DMatrix<f64>, w: &[f64]) -> Result<f64, MetricsError> {
    sortino(&portfolio_series(returns, w)?)
}

pub fn portfolio_series(returns: &DMatrix<f64>, w: &[f64]) -> Result<Vec<f64>, MetricsError> {
    check_len(returns.ncols(), w.len())?;
    Ok((0..returns.nrows())
        .map(|i| (0..w.len()).map(|j| returns[(i, j)] * w[j]).sum())
        .collect())
}

/// Empirical Omega ratio with equiprobable observations.
pub fn omega_ratio(returns: &[f64], tau: f64) -> Result<f64, MetricsError> {
    if returns.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let p = vec![1.0 / returns.len() as f64; returns.len()];
    omega_ratio_weighted(returns, &p, tau)
}

/// `(E y − τ) / E[τ − y]⁺ + 1` under scenario probabilities `probs`.
pub fn omega_ratio_weighted(returns: &[f64], probs: &[f64], tau: f64) -> Result<f64, MetricsError> {
    if returns.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    check_len(returns.len(), probs.len())?;
    let (num, den) = omega_parts(returns, probs, tau);
    if den <= 0.0 {
        return Err(MetricsError::NoLosses(tau));
    }
    Ok(num / den + 1.0)
}

/// Omega ratio extended to series without shortfall: `+∞` when the mean
/// exceeds `τ`, 1 when every return equals `τ`.
pub fn omega_or_infinite(returns: &[f64], probs: &[f64], tau: f64) -> f64 {
    let (num, den) = omega_parts(returns, probs, tau);
    if den > 0.0 {
        num / den + 1.0
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Numerator `E y − τ` and denominator `E[τ − y]⁺` of the Omega ratio.
pub(crate) fn omega_parts(returns: &[f64], probs: &[f64], tau: f64) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&y, &p) in returns.iter().zip(probs) {
        num += p * (y - tau);
        den += p * (tau - y).max(0.0);
    }
    (num, den)
}

/// Empirical CVaR of the losses `−r`, reported as a positive loss.
pub fn cvar_empirical(returns: &[f64], beta: f64) -> Result<f64, MetricsError> {
    if returns.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let p = vec![1.0 / returns.len() as f64; returns.len()];
    cvar_weighted(returns, &p, beta)
}

/// `min_α α + E[−r − α]⁺ / (1 − β)`, evaluated exactly over the breakpoints.
pub fn cvar_weighted(returns: &[f64], probs: &[f64], beta: f64) -> Result<f64, MetricsError> {
    if returns.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(MetricsError::InvalidBeta(beta));
    }
    check_len(returns.len(), probs.len())?;
    if probs.iter().any(|p| *p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(MetricsError::InvalidProbabilities);
    }
    let mut pairs: Vec<(f64, f64)> = returns.iter().map(|r| -r).zip(probs.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Suffix sums of p and p·loss over strictly larger positions.
    let n = pairs.len();
    let scale = 1.0 / (1.0 - beta);
    let mut best = f64::INFINITY;
    let mut tail_p = 0.0;
    let mut tail_pl = 0.0;
    for k in (0..n).rev() {
        let alpha = pairs[k].0;
        let v = alpha + scale * (tail_pl - alpha * tail_p);
        best = best.min(v);
        tail_p += pairs[k].1;
        tail_pl += pairs[k].1 * pairs[k].0;
    }
    Ok(best)
}

pub fn turnover(w_prev: &[f64], w_next: &[f64]) -> Result<f64, MetricsError> {
    check_len(w_prev.len(), w_next.len())?;
    Ok(w_prev.iter().zip(w_next).map(|(a, b)| (b - a).abs()).sum())
}

/// Concentration `Σ wᵢ²`; `1/N` at equal weights.
pub fn diversification(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum()
}

pub fn assets_held(w: &[f64], eps: f64) -> usize {
    w.iter().filter(|x| x.abs() > eps).count()
}

/// Performance summary of one return stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub mean: f64,
    pub std: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub omega: Option<f64>,
    /// CVaR per configured level, same order as `MetricConfig::betas`.
    pub cvar: Vec<f64>,
}

impl SeriesMetrics {
    /// Undefined ratios (zero deviation, no losses) come back as `None`.
    pub fn compute(returns: &[f64], cfg: &MetricConfig) -> Result<Self, MetricsError> {
        cfg.validate()?;
        if returns.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        let m = mean(returns);
        let s = series_std(returns)?;
        let cvar = cfg
            .betas
            .iter()
            .map(|&b| cvar_empirical(returns, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            mean: m,
            std: s,
            sharpe: sharpe(m, s, cfg.rf).ok(),
            sortino: sortino(returns).ok(),
            omega: omega_ratio(returns, cfg.tau).ok(),
            cvar,
        })
    }
}
