use super::*;
use crate::metrics::{cvar_empirical, cvar_weighted, omega_ratio};
use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn settings() -> SolverSettings {
    model_solver_settings()
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// `s × n` returns with asset means in `[0, 2e-3]` and noise of scale `vol`.
fn random_returns(rng: &mut ChaCha8Rng, s: usize, n: usize, vol: f64) -> DMatrix<f64> {
    let means: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.002)).collect();
    let vols: Vec<f64> = (0..n).map(|_| vol * rng.gen_range(0.5..1.5)).collect();
    let z = Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(s, n, |_, j| means[j] + vols[j] * z.sample(rng))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.05
}

fn assert_budget(w: &[f64], long_only: bool) {
    assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-6);
    if long_only {
        assert!(w.iter().all(|v| *v >= -1e-8), "negative weight in {w:?}");
    }
}

fn quad(sigma: &DMatrix<f64>, w: &[f64]) -> f64 {
    let v = dv(w);
    v.dot(&(sigma * &v))
}

fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, steps: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if n == 1 {
            cur.push(left as f64 / steps as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k as f64 / steps as f64);
            rec(n - 1, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, steps, steps, &mut Vec::new(), &mut out);
    out
}

#[test]
fn model_ids_parse_and_print() {
    for m in ModelId::ALL {
        assert_eq!(m.name().parse::<ModelId>().unwrap(), m);
        assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
    }
    assert!("bogus".parse::<ModelId>().is_err());
    assert_eq!(ModelId::Wcvar.nominal_counterpart(), Some(ModelId::Cvar));
}

#[test]
fn risk_min_examples() {
    let eye = DMatrix::identity(2, 2);
    let (w, _) = mv_risk_min(&dv(&[0.1, 0.1]), &eye, 0.1, true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-6);
    assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-6);

    let r = mv_risk_min(&dv(&[0.1, 0.2]), &eye, 0.3, true).unwrap().solve(&settings());
    assert!(matches!(r, Err(ModelError::Infeasible)), "{r:?}");

    let (w, _) = mv_risk_min(&dv(&[0.05]), &DMatrix::identity(1, 1), 0.05, true)
        .unwrap()
        .solve(&settings())
        .unwrap();
    assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-8);
}

#[test]
fn risk_aversion_examples() {
    let eye = DMatrix::identity(2, 2);
    let (w, s) = mv_risk_aversion(&dv(&[0.1, 0.2]), &eye, 1.0, true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(w[0], 0.475, epsilon = 1e-6);
    assert_abs_diff_eq!(w[1], 0.525, epsilon = 1e-6);
    assert_abs_diff_eq!(s.objective, 0.1525 - (0.475f64.powi(2) + 0.525f64.powi(2)), epsilon = 1e-8);

    let (w, _) = mv_risk_aversion(&dv(&[0.1, 0.2]), &eye, 1e6, true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-6);

    let (w, _) = mv_risk_aversion(&dv(&[0.1, 0.1]), &eye, 1.0, true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-6);

    assert!(mv_risk_aversion(&dv(&[0.1]), &eye, 1.0, true).is_err());
    assert!(mv_risk_aversion(&dv(&[0.1, 0.1]), &eye, -1.0, true).is_err());
}

#[test]
fn box_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for long_only in [true, false] {
        let n = 4;
        let mu = DVector::from_fn(n, |_, _| rng.gen_range(-0.1..0.3));
        let sigma = random_psd(&mut rng, n);
        let (w_mv, s_mv) = mv_risk_aversion(&mu, &sigma, 2.0, long_only).unwrap().solve(&settings()).unwrap();

        let zero = DVector::zeros(n);
        let (_, s0) = mv_box(&mu, &sigma, &zero, 2.0, long_only).unwrap().solve(&settings()).unwrap();
        assert_abs_diff_eq!(s0.objective, s_mv.objective, epsilon = 1e-7);

        let delta = DVector::from_fn(n, |_, _| rng.gen_range(0.0..0.05));
        let (w, s) = mv_box(&mu, &sigma, &delta, 2.0, long_only).unwrap().solve(&settings()).unwrap();
        assert_budget(&w, long_only);
        let direct = mu.dot(&dv(&w)) - delta.iter().zip(&w).map(|(d, x)| d * x.abs()).sum::<f64>() - 2.0 * quad(&sigma, &w);
        assert_abs_diff_eq!(s.objective, direct, epsilon = 1e-7);

        if long_only {
            let uniform = DVector::from_element(n, 0.03);
            let (w_u, s_u) = mv_box(&mu, &sigma, &uniform, 2.0, true).unwrap().solve(&settings()).unwrap();
            assert_abs_diff_eq!(s_u.objective, s_mv.objective - 0.03, epsilon = 1e-7);
            for j in 0..n {
                assert_abs_diff_eq!(w_u[j], w_mv[j], epsilon = 1e-5);
            }
        }

        let mut huge = DVector::zeros(n);
        huge[0] = 10.0;
        let (w_h, _) = mv_box(&mu, &sigma, &huge, 2.0, long_only).unwrap().solve(&settings()).unwrap();
        assert!(w_h[0].abs() <= w_mv[0].abs() + 1e-6);
    }
}

#[test]
fn ellipsoidal_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 3;
    let mu = DVector::from_fn(n, |_, _| rng.gen_range(-0.1..0.3));
    let sigma = random_psd(&mut rng, n);
    let sigma_mu = random_psd(&mut rng, n) * 0.1;
    let (_, s_mv) = mv_risk_aversion(&mu, &sigma, 1.5, true).unwrap().solve(&settings()).unwrap();
    let (_, s0) = mv_ellipsoidal(&mu, &sigma, &sigma_mu, 0.0, 1.5, true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(s0.objective, s_mv.objective, epsilon = 1e-7);

    // Identity Σ_μ: penalty at a fixed feasible point is δ‖w‖.
    let m = mv_ellipsoidal(&mu, &sigma, &DMatrix::identity(n, n), 0.4, 1.5, true).unwrap();
    let w = [0.2, 0.3, 0.5];
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = w.to_vec();
    x.extend_from_slice(&w);
    x.push(norm);
    let expected = mu.dot(&dv(&w)) - 1.5 * quad(&sigma, &w) - 0.4 * norm;
    assert_abs_diff_eq!(m.program.objective_value(&x), expected, epsilon = 1e-12);

    let mut prev = f64::INFINITY;
    for delta in [0.0, 0.1, 0.5, 1.0, 3.0] {
        let (w, s) = mv_ellipsoidal(&mu, &sigma, &sigma_mu, delta, 1.5, true).unwrap().solve(&settings()).unwrap();
        assert_budget(&w, true);
        let direct = mu.dot(&dv(&w)) - 1.5 * quad(&sigma, &w) - delta * quad(&sigma_mu, &w).sqrt();
        assert_abs_diff_eq!(s.objective, direct, epsilon = 1e-7);
        assert!(s.objective <= prev + 1e-9);
        prev = s.objective;
    }
}

fn robust_variance(sigma: &DMatrix<f64>, eps: f64, c: f64, w: &[f64]) -> f64 {
    quad(sigma, w) + eps / c * w.iter().map(|x| x * x).sum::<f64>()
}

fn robust_mean(mu: &DVector<f64>, eps: f64, w: &[f64]) -> f64 {
    mu.dot(&dv(w)) - eps * w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn rmu_sits_between_anchor_portfolios() {
    let mu = dv(&[0.1, 0.2]);
    let sigma = DMatrix::identity(2, 2);
    let m = rmu(&mu, &sigma, 0.0, 1.0, 0.5, 0.5, true, &settings()).unwrap();
    assert_abs_diff_eq!(m.f1_star, 0.5, epsilon = 1e-8);
    assert_abs_diff_eq!(m.f2_star, 0.2, epsilon = 1e-8);
    let (w, _) = m.compiled.solve(&settings()).unwrap();
    assert_budget(&w, true);
    assert!(w[1] >= 0.5 - 1e-6 && w[1] <= 1.0 + 1e-8, "{w:?}");

    let (w, _) = rmu(&mu, &sigma, 0.0, 1.0, 1.0 - 1e-5, 1e-5, true, &settings())
        .unwrap()
        .compiled
        .solve(&settings())
        .unwrap();
    assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-3);
    assert!(rmu(&mu, &sigma, 0.0, 1.0, 0.6, 0.6, true, &settings()).is_err());
}

#[test]
fn rmu_is_not_dominated_on_a_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let grid = simplex_grid(3, 19);
    for _ in 0..4 {
        let mu = DVector::from_fn(3, |_, _| rng.gen_range(0.0..0.3));
        let sigma = random_psd(&mut rng, 3);
        let eps = rng.gen_range(0.0..0.2);
        let eta1 = rng.gen_range(0.1..0.9);
        let (w, _) = rmu(&mu, &sigma, eps, 1.0, eta1, 1.0 - eta1, true, &settings())
            .unwrap()
            .compiled
            .solve(&settings())
            .unwrap();
        assert_budget(&w, true);
        let (s, m) = (robust_variance(&sigma, eps, 1.0, &w), robust_mean(&mu, eps, &w));
        for g in &grid {
            let (sg, mg) = (robust_variance(&sigma, eps, 1.0, g), robust_mean(&mu, eps, g));
            let dominates = sg <= s - 1e-7 && mg >= m - 1e-9 || sg <= s + 1e-9 && mg >= m + 1e-7;
            assert!(!dominates, "grid point {g:?} dominates {w:?}");
        }
    }
}

fn set_from(rows: usize, cols: usize, v: &[f64]) -> ScenarioSet {
    ScenarioSet::uniform(DMatrix::from_row_slice(rows, cols, v)).unwrap()
}

#[test]
fn omega_examples() {
    let dominated = set_from(4, 2, &[-0.02, -0.01, 0.01, 0.02, 0.03, 0.035, -0.01, 0.0]);
    let (w, _) = omega_lp(&dominated, 0.0, &OmegaBounds::default()).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-6);
    assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-6);

    let single = set_from(3, 1, &[0.02, -0.01, 0.01]);
    let (w, s) = omega_lp(&single, 0.0, &OmegaBounds::default()).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.objective + 1.0, omega_ratio(&[0.02, -0.01, 0.01], 0.0).unwrap(), epsilon = 1e-6);

    // Every asset loses on average: only ζ = 0 satisfies the excess-return row.
    let losing = set_from(3, 2, &[-0.02, 0.01, 0.01, -0.03, -0.01, 0.005]);
    let r = omega_lp(&losing, 0.0, &OmegaBounds::default()).unwrap().solve(&settings());
    assert!(matches!(r, Err(ModelError::DegenerateFraction(_))), "{r:?}");

    let bad = OmegaBounds { lower: 0.6, upper: 1.0 };
    assert!(matches!(omega_lp(&single, 0.0, &OmegaBounds { lower: 0.5, upper: 0.2 }), Err(ModelError::InvalidInput(_))));
    assert!(matches!(omega_lp(&dominated, 0.0, &bad), Err(ModelError::Infeasible)));
}

#[test]
fn omega_beats_two_asset_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..5 {
        let set = ScenarioSet::uniform(random_returns(&mut rng, 120, 2, 0.01)).unwrap();
        let (w, s) = omega_lp(&set, 0.0, &OmegaBounds::default()).unwrap().solve(&settings()).unwrap();
        let lp = omega_ratio(&set.portfolio_returns(&w), 0.0).unwrap();
        assert_abs_diff_eq!(lp, s.objective + 1.0, epsilon = 1e-6);
        let best = (0..=100)
            .map(|k| {
                let a = k as f64 / 100.0;
                omega_ratio(&set.portfolio_returns(&[a, 1.0 - a]), 0.0).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(lp >= best - 1e-4, "lp {lp} grid {best}");
    }
}

#[test]
fn cvar_examples() {
    let losses = set_from(4, 1, &[-1.0, -2.0, -3.0, -4.0]);
    let (_, s) = cvar_lp(&losses, 0.75, None, Some(&[1.0]), true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(s.objective, 4.0, epsilon = 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let series = random_returns(&mut rng, 100, 1, 0.01);
    let set = ScenarioSet::uniform(series.clone()).unwrap();
    let (_, s) = cvar_lp(&set, 0.95, None, None, true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(s.objective, cvar_empirical(series.as_slice(), 0.95).unwrap(), epsilon = 1e-8);

    let same = set_from(3, 2, &[0.01, -0.02, 0.01, -0.02, 0.01, -0.02]);
    let (w, s) = cvar_lp(&same, 0.9, None, None, true).unwrap().solve(&settings()).unwrap();
    let loss = -(0.01 * w[0] - 0.02 * w[1]);
    assert_abs_diff_eq!(s.objective, loss, epsilon = 1e-8);

    assert!(cvar_lp(&same, 1.0, None, None, true).is_err());
    let r = cvar_lp(&same, 0.9, Some(0.05), None, true).unwrap().solve(&settings());
    assert!(matches!(r, Err(ModelError::Infeasible)), "{r:?}");
}

#[test]
fn cvar_fixed_weights_match_tail_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..10 {
        let set = ScenarioSet::uniform(random_returns(&mut rng, 100, 3, 0.02)).unwrap();
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let series = set.portfolio_returns(&w);
        for beta in [0.90, 0.95, 0.99] {
            let (_, s) = cvar_lp(&set, beta, None, Some(&w), true).unwrap().solve(&settings()).unwrap();
            assert_abs_diff_eq!(s.objective, cvar_empirical(&series, beta).unwrap(), epsilon = 1e-8);
        }
    }
}

fn mixture(sets: Vec<ScenarioSet>) -> MixtureInput {
    MixtureInput::new(sets).unwrap()
}

fn wcor_value(mix: &MixtureInput, tau: f64, gamma: f64, w: &[f64]) -> f64 {
    mix.components
        .iter()
        .map(|c| {
            let r = c.portfolio_returns(w);
            let mean: f64 = r.iter().zip(&c.probs).map(|(y, p)| p * y).sum();
            let short: f64 = r.iter().zip(&c.probs).map(|(y, p)| p * (tau - y).max(0.0)).sum();
            gamma * (mean - tau) - (1.0 - gamma) * short
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn wcor_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a = ScenarioSet::uniform(random_returns(&mut rng, 60, 2, 0.01)).unwrap();
    let b = ScenarioSet::uniform(random_returns(&mut rng, 60, 2, 0.01)).unwrap();
    for (mix, gamma) in [
        (mixture(vec![a.clone()]), 0.5),
        (mixture(vec![a.clone(), b.clone()]), 1.0),
        (mixture(vec![a.clone(), b.clone()]), 0.0),
        (mixture(vec![a.clone(), b.clone()]), 0.3),
    ] {
        let (w, s) = wcor_program(&mix, 0.0, gamma, true).unwrap().solve(&settings()).unwrap();
        assert_budget(&w, true);
        assert_abs_diff_eq!(s.objective, wcor_value(&mix, 0.0, gamma, &w), epsilon = 1e-8);
        let best = (0..=1000)
            .map(|k| {
                let x = k as f64 / 1000.0;
                wcor_value(&mix, 0.0, gamma, &[x, 1.0 - x])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(s.objective >= best - 1e-9, "lp {} grid {best}", s.objective);
    }
}

#[test]
fn worst_omega_sweep_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let a = ScenarioSet::uniform(random_returns(&mut rng, 120, 3, 0.01)).unwrap();
    let one = mixture(vec![a.clone()]);
    let two = mixture(vec![a.clone(), a.clone()]);
    let r1 = maximize_worst_omega(&one, 0.0, 0.05, true, &settings()).unwrap();
    let r2 = maximize_worst_omega(&two, 0.0, 0.05, true, &settings()).unwrap();
    assert_abs_diff_eq!(r1.min_omega, r2.min_omega, epsilon = 1e-6);
    assert_budget(&r1.portfolio.weights, true);

    let (w_or, s_or) = omega_lp(&a, 0.0, &OmegaBounds::default()).unwrap().solve(&settings()).unwrap();
    let or_omega = omega_ratio(&a.portfolio_returns(&w_or), 0.0).unwrap();
    assert_abs_diff_eq!(or_omega, s_or.objective + 1.0, epsilon = 1e-6);
    assert!(r1.min_omega <= or_omega + 1e-6);

    let coarse = maximize_worst_omega(&one, 0.0, 1.0, true, &settings()).unwrap();
    let best = [0.0, 1.0]
        .iter()
        .map(|&g| {
            let (w, _) = wcor_program(&one, 0.0, g, true).unwrap().solve(&settings()).unwrap();
            worst_omega(&one, 0.0, &w)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert_abs_diff_eq!(coarse.min_omega, best, epsilon = 1e-9);
    assert!(maximize_worst_omega(&one, 0.0, 0.0, true, &settings()).is_err());
}

#[test]
fn wcvar_reductions_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let a = ScenarioSet::uniform(random_returns(&mut rng, 80, 3, 0.01)).unwrap();
    let b = ScenarioSet::uniform(random_returns(&mut rng, 80, 3, 0.015)).unwrap();
    let phi = a.means().min();
    let (_, s_cvar) = cvar_lp(&a, 0.95, Some(phi), None, true).unwrap().solve(&settings()).unwrap();
    let (_, s1) = wcvar_program(&mixture(vec![a.clone()]), 0.95, Some(phi), 1.0, true)
        .unwrap()
        .solve(&settings())
        .unwrap();
    assert_abs_diff_eq!(s1.objective, s_cvar.objective, epsilon = 1e-6);
    let (_, s2) = wcvar_program(&mixture(vec![a.clone(), a.clone()]), 0.95, Some(phi), 1.0, true)
        .unwrap()
        .solve(&settings())
        .unwrap();
    assert_abs_diff_eq!(s2.objective, s1.objective, epsilon = 1e-6);

    let mix = mixture(vec![a.clone(), b.clone()]);
    let (w, s) = wcvar_program(&mix, 0.95, None, 1.0, true).unwrap().solve(&settings()).unwrap();
    assert_budget(&w, true);
    for c in &mix.components {
        let tail = cvar_weighted(&c.portfolio_returns(&w), &c.probs, 0.95).unwrap();
        assert!(s.objective >= tail - 1e-8);
    }
    let (w2, s2) = wcvar_program(&mix, 0.95, None, 2.0, true).unwrap().solve(&settings()).unwrap();
    assert_abs_diff_eq!(s2.objective, 2.0 * s.objective, epsilon = 1e-7);
    for j in 0..3 {
        assert_abs_diff_eq!(w2[j], w[j], epsilon = 1e-5);
    }
    assert!(wcvar_program(&mix, 0.95, None, 0.0, true).is_err());
}

fn inputs(seed: u64, rows: usize, n: usize) -> ModelInputs {
    use crate::market_data::{synth_panel, SynthSpec};
    let panel = synth_panel(seed, rows, n, &SynthSpec::default());
    let mut est = EstimationConfig::default();
    est.bootstrap.draws = 100;
    ModelInputs::from_window(&panel, &est, 4, seed).unwrap()
}

#[test]
fn frontiers_respect_budget_and_order() {
    let inp = inputs(21, 250, 4);
    let cfg = ModelConfig::default();
    for model in ModelId::ALL {
        let f = efficient_frontier(model, &inp, &cfg, 5).unwrap();
        assert!(f.warnings.is_empty(), "{model}: {:?}", f.warnings);
        let expected = if matches!(model, ModelId::Or | ModelId::Wcor) { 1 } else { 5 };
        assert_eq!(f.portfolios.len(), expected, "{model}");
        for p in &f.portfolios {
            assert_budget(&p.weights, true);
            assert_eq!(p.model, model);
        }
    }

    let mv = efficient_frontier(ModelId::Mv, &inp, &cfg, 10).unwrap();
    let vars: Vec<f64> = mv.portfolios.iter().map(|p| quad(&inp.estimates.sigma, &p.weights)).collect();
    assert!(vars.windows(2).all(|v| v[1] <= v[0] + 1e-8), "{vars:?}");

    let cv = efficient_frontier(ModelId::Cvar, &inp, &cfg, 10).unwrap();
    let means = inp.scenarios.means();
    let rets: Vec<f64> = cv.portfolios.iter().map(|p| means.dot(&dv(&p.weights))).collect();
    assert!(rets.windows(2).all(|r| r[1] >= r[0] - 1e-10), "{rets:?}");

    let one = efficient_frontier(ModelId::RMu, &inp, &cfg, 1).unwrap();
    assert_eq!(one.portfolios.len(), 1);
    assert_eq!(one.portfolios[0].frontier_param, 0.5);
}

#[test]
fn frontier_reports_total_failure() {
    let inp = inputs(22, 120, 3);
    let cfg = ModelConfig {
        omega_bounds: OmegaBounds { lower: 0.0, upper: 0.1 },
        ..ModelConfig::default()
    };
    assert!(matches!(
        efficient_frontier(ModelId::Or, &inp, &cfg, 3),
        Err(ModelError::AllPointsFailed { .. })
    ));
    assert!(efficient_frontier(ModelId::Mv, &inp, &cfg, 0).is_err());
}

#[test]
fn lambda_grid_shape() {
    assert_eq!(lambda_grid(1e-3, 1e3, 1), vec![1.0]);
    let g = lambda_grid(1e-3, 1e3, 7);
    assert_abs_diff_eq!(g[0], 1e-3, epsilon = 1e-15);
    assert_abs_diff_eq!(g[3], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(g[6], 1e3, epsilon = 1e-9);
}
