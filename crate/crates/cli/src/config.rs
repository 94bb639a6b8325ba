use std::path::{Path, PathBuf};

use clap::Args;
use robfolio_core::backtest::BacktestConfig;
use robfolio_core::models::ModelId;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run depends on. Serialized into `report.json` as the config snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub models: Vec<ModelId>,
    /// Output directory; left out of the snapshot so reports do not depend on where they were written.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub backtest: BacktestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            models: ModelId::ALL.to_vec(),
            out: None,
            backtest: BacktestConfig::default(),
        }
    }
}

/// Flags shared by `backtest` and `frontier`. Any flag given overrides the config file.
#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// Wide returns CSV: `date,<asset>,...`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON config file; absent fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// In-sample window length in rows.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Holding period in rows.
    #[arg(long)]
    pub hold: Option<usize>,
    /// Frontier points per period.
    #[arg(long)]
    pub points: Option<usize>,
    /// Omega threshold for both the models and the reported metrics.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Comma-separated CVaR confidence levels for the metric tables.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step of the worst-case Omega gamma sweep.
    #[arg(long)]
    pub gamma_step: Option<f64>,
    #[arg(long, overrides_with = "no_long_only")]
    pub long_only: bool,
    #[arg(long, overrides_with = "long_only")]
    pub no_long_only: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_models(names: &[String]) -> Result<Vec<ModelId>, CliError> {
    let mut models = Vec::new();
    for name in names {
        let id = name.trim().parse::<ModelId>().map_err(|e| CliError::Config(e.to_string()))?;
        if !models.contains(&id) {
            models.push(id);
        }
    }
    Ok(models)
}

impl RunFlags {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(names) = &self.models {
            cfg.models = parse_models(names)?;
        }
        let bt = &mut cfg.backtest;
        if let Some(h) = self.horizon {
            bt.horizon = h;
        }
        if let Some(f) = self.hold {
            bt.hold = f;
        }
        if let Some(n) = self.points {
            bt.n_points = n;
        }
        if let Some(t) = self.tau {
            bt.model.tau = t;
            bt.metrics.tau = t;
        }
        if let Some(b) = &self.betas {
            bt.metrics.betas = b.clone();
        }
        if let Some(s) = self.seed {
            bt.seed = s;
        }
        if let Some(g) = self.gamma_step {
            bt.model.gamma_step = g;
        }
        if self.long_only {
            bt.model.long_only = true;
        }
        if self.no_long_only {
            bt.model.long_only = false;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if cfg.models.is_empty() {
            return Err(CliError::Config("no models selected".into()));
        }
        bt.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}
