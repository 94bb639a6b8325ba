//! Rolling-window simulation: estimate on the in-sample window, build the
//! frontier, hold the weights over the next window.

use std::ops::Range;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::EstimationConfig;
use crate::market_data::{make_schedule, DataError, Period, ReturnsPanel};
use crate::metrics::{assets_held, diversification, turnover, MetricConfig, MetricsError, SeriesMetrics};
use crate::models::{efficient_frontier, FrontierWarning, ModelConfig, ModelError, ModelId, ModelInputs, Portfolio};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{model}: every period failed; first failure: {first}")]
    AllPeriodsFailed { model: ModelId, first: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// In-sample window length in rows.
    pub horizon: usize,
    /// Holding period in rows.
    pub hold: usize,
    pub n_points: usize,
    /// Number of consecutive blocks the window is cut into for mixture models.
    pub mixture_parts: usize,
    pub seed: u64,
    pub estimation: EstimationConfig,
    pub model: ModelConfig,
    pub metrics: MetricConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            horizon: 250,
            hold: 63,
            n_points: 20,
            mixture_parts: 4,
            seed: 0,
            estimation: EstimationConfig::default(),
            model: ModelConfig::default(),
            metrics: MetricConfig::default(),
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: &str| Err(BacktestError::Config(m.to_string()));
        if self.horizon < 2 || self.hold == 0 {
            return bad("horizon must be at least 2 rows and hold at least 1");
        }
        if self.n_points == 0 {
            return bad("n_points must be positive");
        }
        if self.mixture_parts == 0 || self.mixture_parts > self.horizon {
            return bad("mixture_parts must lie in 1..=horizon");
        }
        let m = &self.model;
        if !(m.cvar_beta > 0.0 && m.cvar_beta < 1.0) {
            return bad("cvar_beta must lie in (0, 1)");
        }
        if !(m.gamma_step > 0.0 && m.gamma_step <= 1.0) {
            return bad("gamma_step must lie in (0, 1]");
        }
        if !(m.lambda_min > 0.0 && m.lambda_min <= m.lambda_max) {
            return bad("lambda grid needs 0 < lambda_min <= lambda_max");
        }
        if !(m.rmu_c > 0.0 && m.w0 > 0.0) {
            return bad("rmu_c and w0 must be positive");
        }
        let b = &self.estimation.bootstrap;
        if b.draws == 0 || b.sample_len == 0 || !(b.percentile > 0.0 && b.percentile <= 1.0) || !(b.c > 0.0) {
            return bad("bootstrap needs draws > 0, sample_len > 0, percentile in (0, 1], c > 0");
        }
        if !(self.estimation.z >= 0.0) || !(self.estimation.chi2_level > 0.0 && self.estimation.chi2_level < 1.0) {
            return bad("z must be non-negative and chi2_level in (0, 1)");
        }
        self.metrics.validate()?;
        Ok(())
    }
}

/// Seed of period `index`, independent of evaluation order.
pub fn period_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

/// Uncertainty-set sizes estimated on the in-sample window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimates {
    pub box_delta: Vec<f64>,
    pub ellipsoid_delta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRecord {
    pub portfolio: Portfolio,
    pub in_sample_returns: Vec<f64>,
    pub out_sample_returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub index: usize,
    pub in_sample: Range<usize>,
    pub out_sample: Range<usize>,
    pub estimates: Option<WindowEstimates>,
    pub portfolios: Vec<PortfolioRecord>,
    pub warnings: Vec<FrontierWarning>,
    /// Why this period's optimization failed, if it did.
    pub failure: Option<String>,
    /// The portfolios were inherited from the previous period.
    pub carried_forward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub model: ModelId,
    pub config: BacktestConfig,
    pub assets: Vec<String>,
    pub periods: Vec<PeriodRecord>,
}

impl BacktestReport {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn record(panel: &ReturnsPanel, period: &Period, portfolio: Portfolio) -> PortfolioRecord {
    let rows = |r: &Range<usize>| -> Vec<f64> {
        r.clone()
            .map(|i| {
                (0..portfolio.weights.len())
                    .map(|j| panel.values()[(i, j)] * portfolio.weights[j])
                    .sum()
            })
            .collect()
    };
    PortfolioRecord {
        in_sample_returns: rows(&period.in_sample),
        out_sample_returns: rows(&period.out_sample),
        portfolio,
    }
}

type PeriodOutcome = Result<(WindowEstimates, Vec<Portfolio>, Vec<FrontierWarning>), ModelError>;

fn optimize_period(panel: &ReturnsPanel, model: ModelId, cfg: &BacktestConfig, index: usize, period: &Period) -> PeriodOutcome {
    let window = panel.slice(period.in_sample.clone())?;
    let inputs = ModelInputs::from_window(&window, &cfg.estimation, cfg.mixture_parts, period_seed(cfg.seed, index))?;
    let frontier = efficient_frontier(model, &inputs, &cfg.model, cfg.n_points)?;
    let est = &inputs.estimates;
    let estimates = WindowEstimates {
        box_delta: est.box_delta.iter().copied().collect(),
        ellipsoid_delta: est.ellipsoid_delta,
        epsilon: est.epsilon,
    };
    Ok((estimates, frontier.portfolios, frontier.warnings))
}

/// Runs one model over every period of the rolling schedule.
///
/// Each period sees only its in-sample rows. A failed period keeps the
/// previous period's weights and is flagged.
pub fn run_backtest(panel: &ReturnsPanel, model: ModelId, cfg: &BacktestConfig) -> Result<BacktestReport, BacktestError> {
    cfg.validate()?;
    let schedule = make_schedule(panel, cfg.horizon, cfg.hold)?;
    let outcomes: Vec<PeriodOutcome> = schedule
        .periods
        .par_iter()
        .enumerate()
        .map(|(index, period)| optimize_period(panel, model, cfg, index, period))
        .collect();

    let mut periods = Vec::with_capacity(schedule.len());
    let mut previous: Option<Vec<Portfolio>> = None;
    let mut first_failure = None;
    for ((index, period), outcome) in schedule.periods.iter().enumerate().zip(outcomes) {
        let rec = match outcome {
            Ok((estimates, portfolios, warnings)) => {
                previous = Some(portfolios.clone());
                PeriodRecord {
                    index,
                    in_sample: period.in_sample.clone(),
                    out_sample: period.out_sample.clone(),
                    estimates: Some(estimates),
                    portfolios: portfolios.into_iter().map(|p| record(panel, period, p)).collect(),
                    warnings,
                    failure: None,
                    carried_forward: false,
                }
            }
            Err(e) => {
                log::warn!("{model} period {index}: {e}");
                first_failure.get_or_insert_with(|| e.to_string());
                let inherited = previous.clone().unwrap_or_default();
                PeriodRecord {
                    index,
                    in_sample: period.in_sample.clone(),
                    out_sample: period.out_sample.clone(),
                    estimates: None,
                    carried_forward: !inherited.is_empty(),
                    portfolios: inherited.into_iter().map(|p| record(panel, period, p)).collect(),
                    warnings: Vec::new(),
                    failure: Some(e.to_string()),
                }
            }
        };
        periods.push(rec);
    }
    if periods.iter().all(|p| p.failure.is_some()) {
        return Err(BacktestError::AllPeriodsFailed {
            model,
            first: first_failure.unwrap_or_default(),
        });
    }
    Ok(BacktestReport {
        model,
        config: cfg.clone(),
        assets: panel.assets().to_vec(),
        periods,
    })
}

/// One averaged metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    /// Mean over the portfolios where the metric is defined.
    pub value: Option<f64>,
    /// Number of portfolios averaged.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTables {
    pub model: ModelId,
    pub in_sample: Vec<MetricRow>,
    pub out_of_sample: Vec<MetricRow>,
}

pub fn cvar_label(beta: f64) -> String {
    format!("cvar_{}", (beta * 100.0).round() as i64)
}

fn average_table(series: &[&[f64]], cfg: &MetricConfig) -> Result<Vec<MetricRow>, BacktestError> {
    let metrics: Vec<SeriesMetrics> = series
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| SeriesMetrics::compute(s, cfg))
        .collect::<Result<_, _>>()?;
    let row = |name: String, values: Vec<Option<f64>>| {
        let defined: Vec<f64> = values.into_iter().flatten().collect();
        MetricRow {
            metric: name,
            value: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            count: defined.len(),
        }
    };
    let mut rows = vec![
        row("mean_return".into(), metrics.iter().map(|m| Some(m.mean)).collect()),
        row("std_dev".into(), metrics.iter().map(|m| Some(m.std)).collect()),
        row("sharpe".into(), metrics.iter().map(|m| m.sharpe).collect()),
        row("sortino".into(), metrics.iter().map(|m| m.sortino).collect()),
        row("omega".into(), metrics.iter().map(|m| m.omega).collect()),
    ];
    for (k, &beta) in cfg.betas.iter().enumerate() {
        rows.push(row(cvar_label(beta), metrics.iter().map(|m| Some(m.cvar[k])).collect()));
    }
    Ok(rows)
}

/// In- and out-of-sample metrics averaged over every recorded portfolio and period.
pub fn aggregate_metrics(report: &BacktestReport) -> Result<MetricTables, BacktestError> {
    let all: Vec<&PortfolioRecord> = report.periods.iter().flat_map(|p| &p.portfolios).collect();
    let ins: Vec<&[f64]> = all.iter().map(|r| r.in_sample_returns.as_slice()).collect();
    let outs: Vec<&[f64]> = all.iter().map(|r| r.out_sample_returns.as_slice()).collect();
    Ok(MetricTables {
        model: report.model,
        in_sample: average_table(&ins, &report.config.metrics)?,
        out_of_sample: average_table(&outs, &report.config.metrics)?,
    })
}

/// Composition averages of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub period: usize,
    pub assets_held: f64,
    pub diversification: f64,
    /// Mean turnover against the previous period's portfolio at the same grid index.
    pub turnover: Option<f64>,
}

pub fn composition(report: &BacktestReport) -> Vec<CompositionRow> {
    let eps = report.config.metrics.asset_epsilon;
    let mut rows = Vec::new();
    let mut prev: Option<&PeriodRecord> = None;
    for period in &report.periods {
        let ps = &period.portfolios;
        if ps.is_empty() {
            prev = None;
            continue;
        }
        let n = ps.len() as f64;
        let held = ps.iter().map(|r| assets_held(&r.portfolio.weights, eps) as f64).sum::<f64>() / n;
        let div = ps.iter().map(|r| diversification(&r.portfolio.weights)).sum::<f64>() / n;
        let turns: Vec<f64> = prev
            .map(|pp| {
                ps.iter()
                    .filter_map(|r| {
                        pp.portfolios
                            .iter()
                            .find(|q| q.portfolio.grid_index == r.portfolio.grid_index)
                            .and_then(|q| turnover(&q.portfolio.weights, &r.portfolio.weights).ok())
                    })
                    .collect()
            })
            .unwrap_or_default();
        rows.push(CompositionRow {
            period: period.index,
            assets_held: held,
            diversification: div,
            turnover: (!turns.is_empty()).then(|| turns.iter().sum::<f64>() / turns.len() as f64),
        });
        prev = Some(period);
    }
    rows
}
