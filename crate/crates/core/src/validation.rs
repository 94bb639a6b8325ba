//! Out-of-sample checks of the uncertainty sets and the Gain score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{BacktestReport, PeriodRecord};
use crate::estimation::{moment_distance, sample_moments, EstimationError};
use crate::market_data::{partition_ranges, DataError, ReturnsPanel};
use crate::metrics::{cvar_empirical, omega_or_infinite, MetricsError};
use crate::models::ModelId;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("reports do not share a schedule: {0}")]
    ScheduleMismatch(String),
    #[error("panel does not match the report: {0}")]
    PanelMismatch(String),
    #[error("{0} has no uncertainty-set check")]
    NotRobust(ModelId),
    #[error("{robust} is scored against {expected}, got {got:?}")]
    WrongNominal {
        robust: ModelId,
        expected: ModelId,
        got: Option<ModelId>,
    },
    #[error("sigma_mu is singular (rank {rank} of {n})")]
    Singular { rank: usize, n: usize },
    #[error("success classification needs at least one sub-period metric")]
    NoQuarters,
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Fraction of assets whose future mean lies within its box radius.
pub fn box_check(mu_future: &[f64], mu_hat: &[f64], delta: &[f64]) -> f64 {
    let n = mu_future.len();
    if n == 0 {
        return 1.0;
    }
    let inside = (0..n).filter(|&i| (mu_future[i] - mu_hat[i]).abs() <= delta[i]).count();
    inside as f64 / n as f64
}

/// How a singular `Σ_μ` is handled by [`ellipsoid_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMode {
    #[default]
    PseudoInverse,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidOutcome {
    pub inside: bool,
    /// Rank of `Σ_μ` was below its dimension and a pseudo-inverse was used.
    pub rank_deficient: bool,
}

/// Mahalanobis test `(μ − μ̂)ᵀ Σ_μ⁻¹ (μ − μ̂) ≤ δ²`.
pub fn ellipsoid_check(
    mu_future: &[f64],
    mu_hat: &[f64],
    sigma_mu: &DMatrix<f64>,
    delta: f64,
    mode: InverseMode,
) -> Result<EllipsoidOutcome, ValidationError> {
    let n = mu_future.len();
    let d = DVector::from_iterator(n, mu_future.iter().zip(mu_hat).map(|(a, b)| a - b));
    let svd = sigma_mu.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * n as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let rank_deficient = rank < n;
    if rank_deficient {
        if mode == InverseMode::Strict {
            return Err(ValidationError::Singular { rank, n });
        }
        log::warn!("sigma_mu has rank {rank} of {n}; using the pseudo-inverse");
    }
    let pinv = svd.pseudo_inverse(tol).map_err(|_| ValidationError::Singular { rank, n })?;
    let dist = d.dot(&(pinv * &d));
    Ok(EllipsoidOutcome {
        inside: dist <= delta * delta,
        rank_deficient,
    })
}

/// Joint-set test `‖μ − μ̂‖ + c ‖Σ − Σ̂‖_F ≤ ε`.
pub fn rmu_check(
    mu: &DVector<f64>,
    mu_hat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    c: f64,
    epsilon: f64,
) -> bool {
    moment_distance(mu, mu_hat, sigma, sigma_hat, c) <= epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSense {
    HigherBetter,
    LowerBetter,
}

/// Values closer than this (relative to their magnitude) compare equal, so
/// solver round-off between equivalent programs does not decide a strict test.
pub const TIE_TOL: f64 = 1e-7;

fn cmp(a: f64, b: f64) -> std::cmp::Ordering {
    if a == b || (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0) {
        std::cmp::Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// The four success conditions, each evaluated on its own.
///
/// For a higher-is-better metric the reference level is the worst (minimum)
/// sub-period value; for lower-is-better it is the maximum and every
/// inequality flips.
pub fn classify_success(
    robust: f64,
    nominal: f64,
    quarters: &[f64],
    sense: MetricSense,
) -> Result<[bool; 4], ValidationError> {
    use std::cmp::Ordering::{Equal, Greater, Less};
    if quarters.is_empty() {
        return Err(ValidationError::NoQuarters);
    }
    // Map a lower-is-better metric onto a higher-is-better one.
    let (r, n, q) = match sense {
        MetricSense::HigherBetter => (robust, nominal, quarters.iter().copied().fold(f64::INFINITY, f64::min)),
        MetricSense::LowerBetter => (-robust, -nominal, -quarters.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    };
    let ge = |a, b| matches!(cmp(a, b), Greater | Equal);
    let lt = |a, b| cmp(a, b) == Less;
    let gt = |a, b| cmp(a, b) == Greater;
    Ok([ge(r, q) && lt(n, q), gt(r, n), lt(r, q) && ge(n, q), lt(r, n)])
}

/// `C(1) + 0.5 C(2) − C(3) − 0.5 C(4)`.
pub fn gain(c: [bool; 4]) -> f64 {
    let v = |b: bool| if b { 1.0 } else { 0.0 };
    v(c[0]) + 0.5 * v(c[1]) - v(c[2]) - 0.5 * v(c[3])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Box,
    Ellipsoid,
    JointMoments,
    OmegaGain,
    CvarGain,
}

impl CheckKind {
    pub fn for_model(model: ModelId) -> Option<CheckKind> {
        match model {
            ModelId::MvBu => Some(CheckKind::Box),
            ModelId::MvEu => Some(CheckKind::Ellipsoid),
            ModelId::RMu => Some(CheckKind::JointMoments),
            ModelId::Wcor => Some(CheckKind::OmegaGain),
            ModelId::Wcvar => Some(CheckKind::CvarGain),
            _ => None,
        }
    }

    pub fn needs_nominal(self) -> bool {
        matches!(self, CheckKind::OmegaGain | CheckKind::CvarGain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationScore {
    pub model: ModelId,
    pub check: CheckKind,
    /// Schedule index of every scored period.
    pub periods: Vec<usize>,
    pub per_period: Vec<f64>,
    /// Arithmetic mean of `per_period`; `None` when nothing could be scored.
    pub average: Option<f64>,
    /// Periods where `Σ_μ` needed a pseudo-inverse.
    pub rank_warnings: usize,
}

fn same_schedule(a: &BacktestReport, b: &BacktestReport) -> Result<(), ValidationError> {
    let ranges = |r: &BacktestReport| -> Vec<_> {
        r.periods.iter().map(|p| (p.in_sample.clone(), p.out_sample.clone())).collect()
    };
    if ranges(a) != ranges(b) {
        return Err(ValidationError::ScheduleMismatch(format!(
            "{} has {} periods, {} has {}",
            a.model,
            a.periods.len(),
            b.model,
            b.periods.len()
        )));
    }
    if a.assets != b.assets {
        return Err(ValidationError::ScheduleMismatch("asset lists differ".into()));
    }
    Ok(())
}

fn moments(panel: &ReturnsPanel, range: std::ops::Range<usize>) -> Result<(DVector<f64>, DMatrix<f64>), ValidationError> {
    Ok(sample_moments(panel.slice(range)?.values())?)
}

fn set_check(report: &BacktestReport, panel: &ReturnsPanel, check: CheckKind, p: &PeriodRecord) -> Result<Option<(f64, bool)>, ValidationError> {
    let Some(est) = &p.estimates else { return Ok(None) };
    let (mu_hat, sigma_hat) = moments(panel, p.in_sample.clone())?;
    let (mu_f, sigma_f) = moments(panel, p.out_sample.clone())?;
    Ok(Some(match check {
        CheckKind::Box => (box_check(mu_f.as_slice(), mu_hat.as_slice(), &est.box_delta), false),
        CheckKind::Ellipsoid => {
            let t = p.in_sample.len() as f64;
            let o = ellipsoid_check(mu_f.as_slice(), mu_hat.as_slice(), &(sigma_hat / t), est.ellipsoid_delta, InverseMode::PseudoInverse)?;
            (if o.inside { 1.0 } else { 0.0 }, o.rank_deficient)
        }
        CheckKind::JointMoments => {
            let c = report.config.estimation.bootstrap.c;
            (if rmu_check(&mu_f, &mu_hat, &sigma_f, &sigma_hat, c, est.epsilon) { 1.0 } else { 0.0 }, false)
        }
        CheckKind::OmegaGain | CheckKind::CvarGain => unreachable!("gain checks pair two reports"),
    }))
}

/// Mean Gain over the robust/nominal portfolio pairs of one period, matched by grid index.
fn gain_check(robust: &BacktestReport, rp: &PeriodRecord, np: &PeriodRecord, check: CheckKind) -> Result<Option<f64>, ValidationError> {
    if rp.failure.is_some() || np.failure.is_some() {
        return Ok(None);
    }
    let cfg = &robust.config;
    let parts = partition_ranges(rp.in_sample.len(), cfg.mixture_parts)?;
    let metric = |series: &[f64]| -> Result<f64, ValidationError> {
        Ok(match check {
            CheckKind::OmegaGain => omega_or_infinite(series, &vec![1.0 / series.len() as f64; series.len()], cfg.model.tau),
            _ => cvar_empirical(series, cfg.model.cvar_beta)?,
        })
    };
    let sense = if check == CheckKind::OmegaGain { MetricSense::HigherBetter } else { MetricSense::LowerBetter };
    let mut gains = Vec::new();
    for (k, r) in rp.portfolios.iter().enumerate() {
        // Single-portfolio models pair with the single nominal portfolio.
        let nominal = if np.portfolios.len() == 1 {
            np.portfolios.first()
        } else {
            np.portfolios.iter().find(|q| q.portfolio.grid_index == r.portfolio.grid_index).or(np.portfolios.get(k))
        };
        let Some(n) = nominal else { continue };
        let quarters = parts
            .iter()
            .map(|range| metric(&r.in_sample_returns[range.clone()]))
            .collect::<Result<Vec<_>, _>>()?;
        let c = classify_success(metric(&r.out_sample_returns)?, metric(&n.out_sample_returns)?, &quarters, sense)?;
        gains.push(gain(c));
    }
    Ok((!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64))
}

/// Scores a robust model's report with its designated check. Gain checks
/// need the nominal counterpart's report on the same schedule.
pub fn validate_report(
    robust: &BacktestReport,
    nominal: Option<&BacktestReport>,
    panel: &ReturnsPanel,
) -> Result<ValidationScore, ValidationError> {
    let check = CheckKind::for_model(robust.model).ok_or(ValidationError::NotRobust(robust.model))?;
    if panel.assets() != robust.assets.as_slice() {
        return Err(ValidationError::PanelMismatch("asset names differ".into()));
    }
    if let Some(last) = robust.periods.last() {
        if last.out_sample.end > panel.len() {
            return Err(ValidationError::PanelMismatch(format!(
                "report needs {} rows, panel has {}",
                last.out_sample.end,
                panel.len()
            )));
        }
    }
    let mut periods = Vec::new();
    let mut per_period = Vec::new();
    let mut rank_warnings = 0;
    if check.needs_nominal() {
        let expected = robust.model.nominal_counterpart().expect("gain checks have a counterpart");
        let nominal = nominal.filter(|n| n.model == expected).ok_or(ValidationError::WrongNominal {
            robust: robust.model,
            expected,
            got: nominal.map(|n| n.model),
        })?;
        same_schedule(robust, nominal)?;
        for (rp, np) in robust.periods.iter().zip(&nominal.periods) {
            if let Some(g) = gain_check(robust, rp, np, check)? {
                periods.push(rp.index);
                per_period.push(g);
            }
        }
    } else {
        for p in &robust.periods {
            if let Some((score, warned)) = set_check(robust, panel, check, p)? {
                periods.push(p.index);
                per_period.push(score);
                rank_warnings += usize::from(warned);
            }
        }
    }
    let average = (!per_period.is_empty()).then(|| per_period.iter().sum::<f64>() / per_period.len() as f64);
    Ok(ValidationScore {
        model: robust.model,
        check,
        periods,
        per_period,
        average,
        rank_warnings,
    })
}
