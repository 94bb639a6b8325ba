use super::*;
use approx::assert_abs_diff_eq;
use proptest::prelude::{prop_assert, proptest, ProptestConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight() -> SolverSettings {
    SolverSettings::with_tolerance(1e-10)
}

fn solve_opt(p: &ConicProgram) -> f64 {
    let s = solve(p, &tight()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal, "{}", p);
    s.objective
}

/// `max c·x` over `lo ≤ x ≤ 10` with one inequality row.
fn base_lp(rng: &mut ChaCha8Rng, n: usize, lo: f64) -> ConicProgram {
    let mut p = ConicProgram::new(n, Sense::Maximize);
    p.linear_cost = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    for j in 0..n {
        p.set_lower(j, lo);
        p.set_upper(j, 10.0);
    }
    let row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.5)).collect();
    p.add_le(dense_terms(&row), rng.gen_range(1.0..4.0));
    p
}

/// The base LP with its single row replaced by one copy per row in `rows`.
fn scenario_lp(base: &ConicProgram, rows: &[Vec<f64>]) -> ConicProgram {
    let rhs = base.ineq_constraints[0].rhs;
    let mut p = base.clone();
    p.ineq_constraints.clear();
    for r in rows {
        p.add_le(dense_terms(r), rhs);
    }
    p
}

fn robust_x(prog: &ConicProgram, n: usize) -> (f64, Vec<f64>) {
    let s = solve(prog, &tight()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    (s.objective, s.x[..n].to_vec())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn unit_ball_sample(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = dot(&v, &v).sqrt().max(1e-12);
    let r = rng.gen_range(0.0f64..1.0).powf(1.0 / k as f64);
    // half the draws on the boundary, where violations would show first
    let r = if rng.gen_bool(0.5) { 1.0 } else { r };
    v.iter().map(|x| x * r / norm).collect()
}

#[test]
fn dual_norm_examples() {
    assert_eq!(dual_norm(&[3.0, 4.0], NormKind::L2), 5.0);
    assert_eq!(dual_norm(&[3.0, -4.0], NormKind::L1), 4.0);
    assert_eq!(dual_norm(&[3.0, -4.0], NormKind::Inf), 7.0);
}

#[test]
fn ellipsoidal_scalar_example() {
    // a ∈ [0.5, 1.5], x ≥ 0, a x ≤ 2 → x ≤ 4/3
    let mut p = ConicProgram::new(1, Sense::Maximize);
    p.linear_cost[0] = 1.0;
    p.set_lower(0, 0.0);
    p.add_le(vec![(0, 1.0)], 2.0);
    let mut u = UncertainLP::new(p.clone());
    u.row_uncertainty[0] = RowUncertainty::Ellipsoidal {
        nominal: vec![1.0],
        shape: DMatrix::from_element(1, 1, 1.0),
        radius: 0.5,
    };
    let rc = ellipsoidal_rc(&u).unwrap();
    assert_abs_diff_eq!(solve_opt(&rc), 4.0 / 3.0, epsilon = 1e-8);
    // enumeration oracle over the two extreme coefficients
    let oracle = solve_opt(&scenario_lp(&p, &[vec![0.5], vec![1.5]]));
    assert_abs_diff_eq!(solve_opt(&rc), oracle, epsilon = 1e-8);

    u.row_uncertainty[0] = RowUncertainty::Ellipsoidal {
        nominal: vec![1.0],
        shape: DMatrix::from_element(1, 1, 1.0),
        radius: 0.0,
    };
    assert_eq!(ellipsoidal_rc(&u).unwrap(), p);
}

#[test]
fn polyhedral_box_is_l1_norm() {
    // −1 ≤ a ≤ 1 in 2-D: max_a a·x = ‖x‖₁
    let d_mat = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
    let u = RowUncertainty::Polyhedral { d_mat: d_mat.clone(), d_vec: vec![1.0; 4] };
    let base = LinearRow { terms: vec![], rhs: 0.0 };
    assert_abs_diff_eq!(worst_case_lhs(&base, &u, &[1.0, -2.0]), 3.0, epsilon = 1e-8);

    let mut p = ConicProgram::new(2, Sense::Maximize);
    p.linear_cost = vec![1.0, 0.5];
    p.add_le(vec![], 1.5);
    let mut ulp = UncertainLP::new(p.clone());
    ulp.row_uncertainty[0] = u;
    let rc = polyhedral_rc(&ulp).unwrap();
    // max x₁ + 0.5x₂ s.t. |x₁| + |x₂| ≤ 1.5 → 1.5
    assert_abs_diff_eq!(solve_opt(&rc), 1.5, epsilon = 1e-8);
}

#[test]
fn polyhedral_singleton_is_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = base_lp(&mut rng, 2, 0.0);
    let a0 = row_dense(&p.ineq_constraints[0].terms, 2);
    let d_mat = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
    let d_vec = vec![a0[0], a0[1], -a0[0], -a0[1]];
    let mut u = UncertainLP::new(p.clone());
    u.row_uncertainty[0] = RowUncertainty::Polyhedral { d_mat, d_vec };
    assert_abs_diff_eq!(solve_opt(&polyhedral_rc(&u).unwrap()), solve_opt(&p), epsilon = 1e-7);
}

#[test]
fn polyhedral_rejects_unbounded_and_empty_sets() {
    let mut p = ConicProgram::new(2, Sense::Maximize);
    p.add_le(vec![(0, 1.0)], 1.0);
    let mut u = UncertainLP::new(p);
    u.row_uncertainty[0] = RowUncertainty::Polyhedral {
        d_mat: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        d_vec: vec![1.0],
    };
    assert!(matches!(polyhedral_rc(&u), Err(RobustError::InvalidPolytope { what: "unbounded", .. })));
    u.row_uncertainty[0] = RowUncertainty::Polyhedral {
        d_mat: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
        d_vec: vec![-1.0, -1.0],
    };
    assert!(matches!(polyhedral_rc(&u), Err(RobustError::InvalidPolytope { what: "empty", .. })));
}

#[test]
fn cardinality_examples() {
    // inner max with Γ = 1, â = 1, x = 1: exactly one coefficient deviates
    let u = RowUncertainty::Cardinality { nominal: vec![0.0; 3], deviation: vec![1.0; 3], budget: 1.0 };
    let base = LinearRow { terms: vec![], rhs: 0.0 };
    assert_eq!(worst_case_lhs(&base, &u, &[1.0, 1.0, 1.0]), 1.0);

    // the dual LP at fixed x gives the same value
    let mut p = ConicProgram::new(3, Sense::Maximize);
    p.add_le(vec![], 0.0);
    for j in 0..3 {
        p.set_lower(j, 1.0);
        p.set_upper(j, 1.0);
    }
    let mut ulp = UncertainLP::new(p);
    ulp.row_uncertainty[0] = u;
    let mut rc = cardinality_rc(&ulp).unwrap();
    // minimize the protection term υΓ + Σn over the auxiliaries
    rc.sense = Sense::Minimize;
    rc.ineq_constraints[0].rhs = 10.0;
    rc.linear_cost = vec![0.0; rc.n_vars];
    for &(j, v) in &rc.ineq_constraints[0].terms {
        rc.linear_cost[j] = v;
    }
    assert_abs_diff_eq!(solve_opt(&rc), 1.0, epsilon = 1e-8);

    let mut bad = ulp.clone();
    bad.row_uncertainty[0] = RowUncertainty::Cardinality { nominal: vec![0.0; 3], deviation: vec![1.0; 3], budget: 4.0 };
    assert!(matches!(cardinality_rc(&bad), Err(RobustError::BudgetOutOfRange { .. })));
    bad.row_uncertainty[0] = RowUncertainty::Cardinality { nominal: vec![0.0; 3], deviation: vec![1.0; 3], budget: -1.0 };
    assert!(matches!(cardinality_rc(&bad), Err(RobustError::BudgetOutOfRange { .. })));
}

#[test]
fn cardinality_extreme_budgets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let p = base_lp(&mut rng, 3, 0.0);
        let a0 = row_dense(&p.ineq_constraints[0].terms, 3);
        let dev: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..0.5)).collect();
        let mut u = UncertainLP::new(p.clone());
        u.row_uncertainty[0] = RowUncertainty::Cardinality { nominal: a0.clone(), deviation: dev.clone(), budget: 0.0 };
        assert_abs_diff_eq!(solve_opt(&cardinality_rc(&u).unwrap()), solve_opt(&p), epsilon = 1e-7);
        u.row_uncertainty[0] = RowUncertainty::Cardinality { nominal: a0.clone(), deviation: dev.clone(), budget: 3.0 };
        let full: Vec<f64> = a0.iter().zip(&dev).map(|(a, d)| a + d).collect();
        let oracle = solve_opt(&scenario_lp(&p, &[full]));
        assert_abs_diff_eq!(solve_opt(&cardinality_rc(&u).unwrap()), oracle, epsilon = 1e-7);
    }
}

#[test]
fn norm_examples() {
    let m = DMatrix::identity(2, 2);
    let base = LinearRow { terms: vec![], rhs: 0.0 };
    let u = RowUncertainty::Norm { m: m.clone(), radius: 0.7, p: NormKind::Inf };
    assert_abs_diff_eq!(worst_case_lhs(&base, &u, &[1.0, -2.0]), 3.0 * 0.7, epsilon = 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let p = base_lp(&mut rng, 2, -2.0);
        let a0 = row_dense(&p.ineq_constraints[0].terms, 2);
        let mut un = UncertainLP::new(p.clone());
        un.row_uncertainty[0] = RowUncertainty::Norm { m: m.clone(), radius: 0.0, p: NormKind::L1 };
        assert_abs_diff_eq!(solve_opt(&norm_rc(&un).unwrap()), solve_opt(&p), epsilon = 1e-8);

        let r = rng.gen_range(0.05..0.5);
        un.row_uncertainty[0] = RowUncertainty::Norm { m: m.clone(), radius: r, p: NormKind::L2 };
        let mut ue = UncertainLP::new(p.clone());
        ue.row_uncertainty[0] = RowUncertainty::Ellipsoidal { nominal: a0, shape: m.clone(), radius: r };
        assert_abs_diff_eq!(
            solve_opt(&norm_rc(&un).unwrap()),
            solve_opt(&ellipsoidal_rc(&ue).unwrap()),
            epsilon = 1e-6
        );
    }

    let mut p = ConicProgram::new(2, Sense::Maximize);
    p.add_le(vec![], 1.0);
    let mut sing = UncertainLP::new(p);
    sing.row_uncertainty[0] = RowUncertainty::Norm { m: DMatrix::zeros(2, 2), radius: 1.0, p: NormKind::L2 };
    assert!(matches!(norm_rc(&sing), Err(RobustError::SingularMatrix { .. })));
}

#[test]
fn wrong_kind_is_rejected() {
    let mut p = ConicProgram::new(1, Sense::Maximize);
    p.add_le(vec![(0, 1.0)], 1.0);
    let mut u = UncertainLP::new(p);
    u.row_uncertainty[0] = RowUncertainty::Norm { m: DMatrix::identity(1, 1), radius: 1.0, p: NormKind::L2 };
    assert!(matches!(ellipsoidal_rc(&u), Err(RobustError::WrongKind { .. })));
    assert!(robust_counterpart(&u).is_ok());
}

/// All vertices of `{a : D a ≤ d}` in dimension ≤ 3.
fn polytope_vertices(d_mat: &DMatrix<f64>, d_vec: &[f64]) -> Vec<Vec<f64>> {
    let n = d_mat.ncols();
    let r = d_mat.nrows();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut pick = |rows: &[usize]| {
        let a = DMatrix::from_fn(n, n, |i, j| d_mat[(rows[i], j)]);
        if a.determinant().abs() < 1e-10 {
            return;
        }
        let rhs = DVector::from_fn(n, |i, _| d_vec[rows[i]]);
        let v = a.lu().solve(&rhs).unwrap();
        let ok = (0..r).all(|k| (0..n).map(|j| d_mat[(k, j)] * v[j]).sum::<f64>() <= d_vec[k] + 1e-9);
        if ok {
            out.push(v.as_slice().to_vec());
        }
    };
    for i in 0..r {
        for j in i + 1..r {
            if n == 2 {
                pick(&[i, j]);
            } else {
                for k in j + 1..r {
                    pick(&[i, j, k]);
                }
            }
        }
    }
    out
}

/// A random polytope around `center`: a box plus a few cutting rows that keep `center` inside.
fn random_polytope(rng: &mut ChaCha8Rng, center: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let n = center.len();
    let extra = rng.gen_range(0..3);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; n];
            r[j] = sign;
            rows.push(r);
            rhs.push(sign * center[j] + rng.gen_range(0.05..0.4));
        }
    }
    for _ in 0..extra {
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        rhs.push(dot(&r, center) + rng.gen_range(0.01..0.2));
        rows.push(r);
    }
    let d_mat = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    (d_mat, rhs)
}

fn subsets_with_signs(n: usize, budget: usize) -> Vec<Vec<f64>> {
    // every z ∈ {−1, 0, 1}ⁿ with at most `budget` nonzeros
    let mut out = Vec::new();
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let z: Vec<f64> = (0..n)
            .map(|_| {
                let d = c % 3;
                c /= 3;
                [0.0, 1.0, -1.0][d]
            })
            .collect();
        if z.iter().filter(|v| **v != 0.0).count() <= budget {
            out.push(z);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ellipsoidal_dominates_samples(seed in 0u64..5000, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = base_lp(&mut rng, n, 0.0);
        let a0 = row_dense(&p.ineq_constraints[0].terms, n);
        let k = rng.gen_range(1..=n);
        let shape = DMatrix::from_fn(k, n, |_, _| rng.gen_range(-0.3..0.3));
        let radius = rng.gen_range(0.1..1.0);
        let mut u = UncertainLP::new(p.clone());
        u.row_uncertainty[0] = RowUncertainty::Ellipsoidal { nominal: a0.clone(), shape: shape.clone(), radius };
        let (opt, x) = robust_x(&ellipsoidal_rc(&u).unwrap(), n);
        let rhs = p.ineq_constraints[0].rhs;
        let mut samples = Vec::new();
        for _ in 0..1000 {
            let v = unit_ball_sample(&mut rng, k);
            let a: Vec<f64> = (0..n).map(|j| a0[j] + radius * (0..k).map(|r| shape[(r, j)] * v[r]).sum::<f64>()).collect();
            prop_assert!(dot(&a, &x) <= rhs + 1e-6);
            samples.push(a);
        }
        // fewer rows can only help: the sampled LP is a relaxation
        let relaxed = solve_opt(&scenario_lp(&p, &samples));
        prop_assert!(opt <= relaxed + 1e-6);
        // the worst case in closed form is tight at the optimum or the row is slack
        prop_assert!(worst_case_lhs(&p.ineq_constraints[0], &u.row_uncertainty[0], &x) <= rhs + 1e-6);
    }

    #[test]
    fn polyhedral_matches_vertex_enumeration(seed in 0u64..5000, n in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = base_lp(&mut rng, n, -2.0);
        let a0 = row_dense(&p.ineq_constraints[0].terms, n);
        let (d_mat, d_vec) = random_polytope(&mut rng, &a0);
        let mut u = UncertainLP::new(p.clone());
        u.row_uncertainty[0] = RowUncertainty::Polyhedral { d_mat: d_mat.clone(), d_vec: d_vec.clone() };
        let (opt, _) = robust_x(&polyhedral_rc(&u).unwrap(), n);
        let verts = polytope_vertices(&d_mat, &d_vec);
        prop_assert!(!verts.is_empty());
        let oracle = solve_opt(&scenario_lp(&p, &verts));
        prop_assert!((opt - oracle).abs() < 1e-6, "{} vs {}", opt, oracle);
    }

    #[test]
    fn cardinality_matches_deviation_enumeration(seed in 0u64..5000, n in 1usize..4, g in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = g.min(n);
        let p = base_lp(&mut rng, n, -2.0);
        let a0 = row_dense(&p.ineq_constraints[0].terms, n);
        let dev: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.6)).collect();
        let mut u = UncertainLP::new(p.clone());
        u.row_uncertainty[0] = RowUncertainty::Cardinality { nominal: a0.clone(), deviation: dev.clone(), budget: budget as f64 };
        let (opt, x) = robust_x(&cardinality_rc(&u).unwrap(), n);
        let rows: Vec<Vec<f64>> = subsets_with_signs(n, budget)
            .into_iter()
            .map(|z| (0..n).map(|j| a0[j] + z[j] * dev[j]).collect())
            .collect();
        let oracle = solve_opt(&scenario_lp(&p, &rows));
        prop_assert!((opt - oracle).abs() < 1e-6, "{} vs {}", opt, oracle);
        // domination over random deviations inside the budget
        let rhs = p.ineq_constraints[0].rhs;
        for _ in 0..1000 {
            let mut z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l1: f64 = z.iter().map(|v| v.abs()).sum();
            if l1 > budget as f64 {
                let s = budget as f64 / l1;
                z.iter_mut().for_each(|v| *v *= s);
            }
            let a: Vec<f64> = (0..n).map(|j| a0[j] + z[j] * dev[j]).collect();
            prop_assert!(dot(&a, &x) <= rhs + 1e-6);
        }
    }

    #[test]
    fn norm_matches_ball_vertices(seed in 0u64..5000, n in 1usize..4, which in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = base_lp(&mut rng, n, -2.0);
        let a0 = row_dense(&p.ineq_constraints[0].terms, n);
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
        for i in 0..n { m[(i, i)] += 2.0; }
        let radius = rng.gen_range(0.05..0.5);
        let kind = [NormKind::L1, NormKind::Inf][which];
        let mut u = UncertainLP::new(p.clone());
        u.row_uncertainty[0] = RowUncertainty::Norm { m: m.clone(), radius, p: kind };
        let (opt, _) = robust_x(&norm_rc(&u).unwrap(), n);
        // vertices of the p-ball, mapped through M⁻¹
        let balls: Vec<Vec<f64>> = match kind {
            NormKind::L1 => (0..2 * n).map(|k| { let mut v = vec![0.0; n]; v[k / 2] = if k % 2 == 0 { radius } else { -radius }; v }).collect(),
            _ => (0..1usize << n).map(|mask| (0..n).map(|j| if mask >> j & 1 == 1 { radius } else { -radius }).collect()).collect(),
        };
        let minv = m.clone().try_inverse().unwrap();
        let rows: Vec<Vec<f64>> = balls.iter().map(|v| {
            let d = &minv * DVector::from_column_slice(v);
            (0..n).map(|j| a0[j] + d[j]).collect()
        }).collect();
        let oracle = solve_opt(&scenario_lp(&p, &rows));
        prop_assert!((opt - oracle).abs() < 1e-6, "{} vs {}", opt, oracle);
    }

    #[test]
    fn larger_sets_never_help(seed in 0u64..5000, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = base_lp(&mut rng, n, 0.0);
        let a0 = row_dense(&p.ineq_constraints[0].terms, n);
        let shape = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.3..0.3));
        let dev: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
        let mut prev = [f64::INFINITY; 3];
        for step in 0..4 {
            let r = step as f64 * 0.25;
            let mut u = UncertainLP::new(p.clone());
            u.row_uncertainty[0] = RowUncertainty::Ellipsoidal { nominal: a0.clone(), shape: shape.clone(), radius: r };
            let e = solve_opt(&ellipsoidal_rc(&u).unwrap());
            u.row_uncertainty[0] = RowUncertainty::Cardinality { nominal: a0.clone(), deviation: dev.clone(), budget: (r * n as f64).min(n as f64) };
            let c = solve_opt(&cardinality_rc(&u).unwrap());
            u.row_uncertainty[0] = RowUncertainty::Norm { m: DMatrix::identity(n, n), radius: r, p: NormKind::Inf };
            let nm = solve_opt(&norm_rc(&u).unwrap());
            for (k, v) in [e, c, nm].into_iter().enumerate() {
                // maximization: the optimum can only shrink
                prop_assert!(v <= prev[k] + 1e-7);
                prev[k] = v;
            }
        }
    }

    #[test]
    fn zero_size_sets_reproduce_nominal(seed in 0u64..5000, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = base_lp(&mut rng, n, -1.0);
        let nominal = solve_opt(&p);
        let a0 = row_dense(&p.ineq_constraints[0].terms, n);
        let specs = [
            RowUncertainty::Ellipsoidal { nominal: a0.clone(), shape: DMatrix::identity(n, n), radius: 0.0 },
            RowUncertainty::Cardinality { nominal: a0.clone(), deviation: vec![0.3; n], budget: 0.0 },
            RowUncertainty::Norm { m: DMatrix::identity(n, n), radius: 0.0, p: NormKind::L2 },
        ];
        for spec in specs {
            let mut u = UncertainLP::new(p.clone());
            u.row_uncertainty[0] = spec;
            let v = solve_opt(&robust_counterpart(&u).unwrap());
            prop_assert!((v - nominal).abs() <= 1e-8, "{} vs {}", v, nominal);
        }
    }
}
