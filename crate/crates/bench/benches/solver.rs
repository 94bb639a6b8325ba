use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use robfolio_bench::window;
use robfolio_core::backtest::{run_backtest, BacktestConfig};
use robfolio_core::market_data::{make_schedule, synth_panel, SynthSpec};
use robfolio_core::models::{
    cvar_lp, maximize_worst_omega, model_solver_settings, mv_ellipsoidal, mv_risk_aversion, omega_lp, rmu,
    wcvar_program, ModelId, OmegaBounds,
};

fn single_programs(c: &mut Criterion) {
    let s = model_solver_settings();
    let mut group = c.benchmark_group("program");
    for assets in [5, 20] {
        let w = window(250, assets, 4);
        let sigma_mu = &w.sigma / 250.0;
        group.bench_with_input(BenchmarkId::new("mv", assets), &w, |b, w| {
            b.iter(|| mv_risk_aversion(&w.mu, &w.sigma, 1.0, true).unwrap().solve(&s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mveu", assets), &w, |b, w| {
            b.iter(|| mv_ellipsoidal(&w.mu, &w.sigma, &sigma_mu, 0.5, 1.0, true).unwrap().solve(&s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("rmu", assets), &w, |b, w| {
            b.iter(|| rmu(&w.mu, &w.sigma, 0.01, 1.0, 0.5, 0.5, true, &s).unwrap().compiled.solve(&s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cvar", assets), &w, |b, w| {
            b.iter(|| cvar_lp(&w.scenarios, 0.95, None, None, true).unwrap().solve(&s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("omega", assets), &w, |b, w| {
            b.iter(|| omega_lp(&w.scenarios, 0.0, &OmegaBounds::default()).unwrap().solve(&s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("wcvar", assets), &w, |b, w| {
            b.iter(|| wcvar_program(&w.mixture, 0.95, None, 1.0, true).unwrap().solve(&s).unwrap())
        });
    }
    group.finish();
}

fn worst_omega_sweep(c: &mut Criterion) {
    let s = model_solver_settings();
    let w = window(250, 5, 4);
    c.bench_function("wcor_sweep_step_0.05", |b| {
        b.iter(|| maximize_worst_omega(&w.mixture, 0.0, 0.05, true, &s).unwrap())
    });
}

fn schedule(c: &mut Criterion) {
    let panel = synth_panel(1, 3024, 5, &SynthSpec::default());
    c.bench_function("schedule_3024", |b| b.iter(|| make_schedule(black_box(&panel), 250, 63).unwrap()));
}

fn backtest(c: &mut Criterion) {
    let panel = synth_panel(2, 3024, 5, &SynthSpec::default());
    let cfg = BacktestConfig::default();
    let mut group = c.benchmark_group("backtest_44_periods");
    group.sample_size(10);
    for model in [ModelId::Mv, ModelId::Cvar, ModelId::RMu] {
        group.bench_function(model.name(), |b| b.iter(|| run_backtest(&panel, model, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, single_programs, worst_omega_sweep, schedule, backtest);
criterion_main!(benches);
