use std::path::{Path, PathBuf};

use robfolio_core::backtest::{aggregate_metrics, run_backtest, BacktestError, BacktestReport};
use robfolio_core::market_data::{parse_returns_csv, synth_panel, ReturnsPanel, SynthSpec};
use robfolio_core::models::{efficient_frontier, ModelError, ModelInputs};
use robfolio_core::validation::{validate_report, CheckKind, ValidationError, ValidationScore};

use crate::config::RunConfig;
use crate::output::{self, sha256_hex, write_atomic, RunReport};
use crate::CliError;

fn load_panel(path: &Path) -> Result<(ReturnsPanel, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let panel = parse_returns_csv(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((panel, sha256_hex(&bytes)))
}

fn require_input(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.input
        .as_deref()
        .ok_or_else(|| CliError::Config("no input file: pass --input or set \"input\" in the config".into()))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn backtest_error(e: BacktestError) -> CliError {
    match e {
        BacktestError::Config(_) => CliError::Config(e.to_string()),
        BacktestError::AllPeriodsFailed { .. } => CliError::Solve(e.to_string()),
        BacktestError::Data(_) | BacktestError::Metrics(_) => CliError::Data(e.to_string()),
    }
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidInput(_) => CliError::Config(e.to_string()),
        ModelError::Data(_) | ModelError::Estimation(_) | ModelError::Metrics(_) => CliError::Data(e.to_string()),
        _ => CliError::Solve(e.to_string()),
    }
}

fn validation_error(e: ValidationError) -> CliError {
    match e {
        ValidationError::ScheduleMismatch(_)
        | ValidationError::NotRobust(_)
        | ValidationError::WrongNominal { .. }
        | ValidationError::PanelMismatch(_) => CliError::Config(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

/// Scores every robust model in `robust` whose nominal counterpart is in `nominal`.
fn score_models(robust: &[BacktestReport], nominal: &[BacktestReport], panel: &ReturnsPanel) -> Result<Vec<ValidationScore>, CliError> {
    let mut scores = Vec::new();
    for r in robust.iter().filter(|r| r.model.is_robust()) {
        let counterpart = r.model.nominal_counterpart();
        let Some(n) = nominal.iter().find(|n| Some(n.model) == counterpart) else {
            log::warn!("{}: nominal counterpart not in the run; not scored", r.model);
            continue;
        };
        let needs = CheckKind::for_model(r.model).is_some_and(|c| c.needs_nominal());
        scores.push(validate_report(r, needs.then_some(n), panel).map_err(validation_error)?);
    }
    Ok(scores)
}

pub fn backtest(cfg: &RunConfig) -> Result<(), CliError> {
    let input = require_input(cfg)?;
    let (panel, hash) = load_panel(input)?;
    let dir = out_dir(cfg)?;
    let mut reports = Vec::with_capacity(cfg.models.len());
    for &model in &cfg.models {
        log::info!("running {model}");
        let report = run_backtest(&panel, model, &cfg.backtest).map_err(backtest_error)?;
        for p in report.periods.iter().filter(|p| p.failure.is_some()) {
            log::warn!("{model} period {}: {}", p.index, p.failure.as_deref().unwrap_or_default());
        }
        reports.push(report);
    }
    let validation = score_models(&reports, &reports, &panel)?;
    let tables = reports
        .iter()
        .map(aggregate_metrics)
        .collect::<Result<Vec<_>, _>>()
        .map_err(backtest_error)?;
    let report = RunReport {
        input: input.display().to_string(),
        input_sha256: hash,
        config: cfg.clone(),
        models: reports,
        validation,
    };
    let json = serde_json::to_string(&report).map_err(|e| CliError::Output(e.to_string()))?;
    write_atomic(&dir.join("metrics_in.csv"), output::metrics_csv(&tables, true).as_bytes())?;
    write_atomic(&dir.join("metrics_out.csv"), output::metrics_csv(&tables, false).as_bytes())?;
    write_atomic(&dir.join("composition.csv"), output::composition_csv(&report.models).as_bytes())?;
    write_atomic(&dir.join("validation.csv"), output::validation_csv(&report.validation).as_bytes())?;
    write_atomic(&dir.join("report.json"), json.as_bytes())
}

pub fn frontier(cfg: &RunConfig, start: usize) -> Result<(), CliError> {
    let [model] = cfg.models[..] else {
        return Err(CliError::Config(format!("frontier needs exactly one model, got {}", cfg.models.len())));
    };
    let (panel, _) = load_panel(require_input(cfg)?)?;
    let dir = out_dir(cfg)?;
    let bt = &cfg.backtest;
    let end = start + bt.horizon;
    if end > panel.len() {
        return Err(CliError::Data(format!("window {start}..{end} exceeds the {} rows of the panel", panel.len())));
    }
    let window = panel.slice(start..end).map_err(|e| CliError::Data(e.to_string()))?;
    let inputs = ModelInputs::from_window(&window, &bt.estimation, bt.mixture_parts, bt.seed).map_err(model_error)?;
    let frontier = efficient_frontier(model, &inputs, &bt.model, bt.n_points).map_err(model_error)?;

    for w in &frontier.warnings {
        log::warn!("{model} point {} (param {}): {}", w.index, w.param, w.reason);
    }
    let csv = output::frontier_csv(&frontier, &inputs.estimates, window.assets()).map_err(|e| CliError::Data(e.to_string()))?;
    write_atomic(&dir.join("frontier.csv"), csv.as_bytes())
}

fn read_report(path: &Path) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: not a run report: {e}", path.display())))
}

pub fn validate(robust: &Path, nominal: &Path, input: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let r = read_report(robust)?;
    let n = read_report(nominal)?;
    if r.input_sha256 != n.input_sha256 {
        return Err(CliError::Config("the reports were computed on different inputs".into()));
    }
    let pairs = r
        .models
        .iter()
        .filter(|m| m.model.is_robust() && n.models.iter().any(|x| Some(x.model) == m.model.nominal_counterpart()))
        .count();
    if pairs == 0 {
        return Err(CliError::Config(
            "no robust model in the first report has its nominal counterpart in the second".into(),
        ));
    }
    let path = input.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&r.input));
    let (panel, hash) = load_panel(&path)?;
    if hash != r.input_sha256 {
        return Err(CliError::Data(format!("{} changed since the reports were written", path.display())));
    }
    let scores = score_models(&r.models, &n.models, &panel)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    write_atomic(&out.join("validation.csv"), output::validation_csv(&scores).as_bytes())
}

pub fn synth(rows: usize, assets: usize, seed: u64, constant: Option<f64>, out: &Path) -> Result<(), CliError> {
    if rows == 0 || assets == 0 {
        return Err(CliError::Config("rows and assets must be positive".into()));
    }
    let spec = match constant {
        Some(value) => SynthSpec::Constant { value },
        None => SynthSpec::default(),
    };
    let panel = synth_panel(seed, rows, assets, &spec);
    let mut bytes = Vec::new();
    panel.write_csv(&mut bytes).map_err(|e| CliError::Output(e.to_string()))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Output(format!("{}: {e}", parent.display())))?;
    }
    write_atomic(out, &bytes)
}
