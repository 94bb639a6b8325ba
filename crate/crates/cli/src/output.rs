//! Output files of a run, all written under one directory:
//!
//! - `report.json`: input path and SHA-256, config snapshot, one backtest
//!   report per model, and the validation scores.
//! - `metrics_in.csv`, `metrics_out.csv`: one row per metric, one column per model.
//! - `composition.csv`: `model,period,assets_held,diversification,turnover`.
//! - `validation.csv`: one column per robust model; an `average` row, then one row per period.
//! - `frontier.csv` (from `frontier`): one row per grid point.
//!
//! Numbers in CSVs use six decimals; undefined values are empty cells.

use std::fmt::Write as _;
use std::path::Path;

use robfolio_core::backtest::{composition, BacktestReport, MetricRow, MetricTables};
use robfolio_core::estimation::EstimateSet;
use robfolio_core::metrics::{mean_return, std_dev, MetricsError};
use robfolio_core::models::Frontier;
use robfolio_core::validation::ValidationScore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input: String,
    pub input_sha256: String,
    pub config: RunConfig,
    pub models: Vec<BacktestReport>,
    pub validation: Vec<ValidationScore>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fmt6(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| CliError::Output(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn metrics_csv(tables: &[MetricTables], in_sample: bool) -> String {
    fn pick(t: &MetricTables, in_sample: bool) -> &[MetricRow] {
        if in_sample {
            &t.in_sample
        } else {
            &t.out_of_sample
        }
    }
    let mut s = String::from("metric");
    for t in tables {
        write!(s, ",{}", t.model).unwrap();
    }
    s.push('\n');
    let Some(first) = tables.first() else { return s };
    for (k, row) in pick(first, in_sample).iter().enumerate() {
        s.push_str(&row.metric);
        for t in tables {
            write!(s, ",{}", fmt6(pick(t, in_sample)[k].value)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn composition_csv(reports: &[BacktestReport]) -> String {
    let mut s = String::from("model,period,assets_held,diversification,turnover\n");
    for r in reports {
        for row in composition(r) {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.model,
                row.period,
                fmt6(Some(row.assets_held)),
                fmt6(Some(row.diversification)),
                fmt6(row.turnover)
            )
            .unwrap();
        }
    }
    s
}

pub fn validation_csv(scores: &[ValidationScore]) -> String {
    let mut s = String::from("period");
    for v in scores {
        write!(s, ",{}", v.model).unwrap();
    }
    s.push_str("\naverage");
    for v in scores {
        write!(s, ",{}", fmt6(v.average)).unwrap();
    }
    s.push('\n');
    let mut periods: Vec<usize> = scores.iter().flat_map(|v| v.periods.iter().copied()).collect();
    periods.sort_unstable();
    periods.dedup();
    for p in periods {
        write!(s, "{p}").unwrap();
        for v in scores {
            let cell = v.periods.iter().position(|q| *q == p).map(|k| v.per_period[k]);
            write!(s, ",{}", fmt6(cell)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// One row per grid point in grid order. Points that failed keep their row
/// with status `infeasible` and empty weights.
pub fn frontier_csv(frontier: &Frontier, est: &EstimateSet, assets: &[String]) -> Result<String, MetricsError> {
    let mut rows: Vec<(usize, String)> = Vec::new();
    for p in &frontier.portfolios {
        let mean = mean_return(est.mu_hat.as_slice(), &p.weights)?;
        let std = std_dev(&est.sigma, &p.weights)?;
        let mut line = format!("{},{},ok", p.grid_index, fmt6(Some(p.frontier_param)));
        for w in &p.weights {
            write!(line, ",{}", fmt6(Some(*w))).unwrap();
        }
        write!(line, ",{},{}", fmt6(Some(mean)), fmt6(Some(std))).unwrap();
        rows.push((p.grid_index, line));
    }
    for w in &frontier.warnings {
        let blanks = ",".repeat(assets.len() + 2);
        rows.push((w.index, format!("{},{},infeasible{blanks}", w.index, fmt6(Some(w.param)))));
    }
    rows.sort_by_key(|(k, _)| *k);
    let mut csv = String::from("index,param,status");
    for a in assets {
        write!(csv, ",w_{a}").unwrap();
    }
    csv.push_str(",mean,std\n");
    for (_, line) in rows {
        csv.push_str(&line);
        csv.push('\n');
    }
    Ok(csv)
}
