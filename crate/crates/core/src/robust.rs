//! Tractable robust counterparts of linear programs with uncertain
//! constraint rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{solve, ConicError, ConicProgram, LinearRow, Sense, SolveStatus, SolverSettings, Terms};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RobustError {
    #[error(transparent)]
    Program(#[from] ConicError),
    #[error("base program must be a pure LP (no quadratic term or cones)")]
    NotLinear,
    #[error("expected {expected} uncertainty specs (one per inequality row), got {got}")]
    RowCount { expected: usize, got: usize },
    #[error("row {row}: {what} has length/shape {got}, expected {expected}")]
    Shape { row: usize, what: &'static str, expected: String, got: String },
    #[error("row {0}: {1}")]
    Negative(usize, String),
    #[error("row {row}: budget {gamma} outside [0, {n}]")]
    BudgetOutOfRange { row: usize, gamma: f64, n: usize },
    #[error("row {row}: norm matrix is singular")]
    SingularMatrix { row: usize },
    #[error("row {row}: uncertainty polytope is {what}")]
    InvalidPolytope { row: usize, what: &'static str },
    #[error("row {row} carries {found} uncertainty, this transformation handles {expected}")]
    WrongKind { row: usize, found: &'static str, expected: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
    Inf,
}

/// Uncertainty attached to one inequality row `a·x ≤ b`.
///
/// `Ellipsoidal` and `Cardinality` carry their own nominal row, which
/// replaces the base coefficients. `Norm` uses the base row as its center.
/// `Polyhedral` describes the whole set of admissible rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowUncertainty {
    None,
    /// `{a⁰ + ρ Δᵀu : ‖u‖₂ ≤ 1}`
    Ellipsoidal { nominal: Vec<f64>, shape: DMatrix<f64>, radius: f64 },
    /// `{a : D a ≤ d}`
    Polyhedral { d_mat: DMatrix<f64>, d_vec: Vec<f64> },
    /// Up to `budget` coefficients move by at most `deviation[j]` each.
    Cardinality { nominal: Vec<f64>, deviation: Vec<f64>, budget: f64 },
    /// `{ā + M⁻¹u : ‖u‖_p ≤ radius}`
    Norm { m: DMatrix<f64>, radius: f64, p: NormKind },
}

impl RowUncertainty {
    fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Ellipsoidal { .. } => "ellipsoidal",
            Self::Polyhedral { .. } => "polyhedral",
            Self::Cardinality { .. } => "cardinality",
            Self::Norm { .. } => "norm",
        }
    }
}

/// An LP whose inequality rows may each be uncertain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainLP {
    pub base: ConicProgram,
    pub row_uncertainty: Vec<RowUncertainty>,
}

/// `‖v‖_∞`, `‖v‖₂`, `‖v‖₁` for `p` = 1, 2, ∞: the norm dual to `‖·‖_p`.
pub fn dual_norm(v: &[f64], p: NormKind) -> f64 {
    match p {
        NormKind::L1 => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormKind::Inf => v.iter().map(|x| x.abs()).sum(),
    }
}

impl UncertainLP {
    pub fn new(base: ConicProgram) -> Self {
        let rows = base.ineq_constraints.len();
        Self { base, row_uncertainty: vec![RowUncertainty::None; rows] }
    }

    pub fn validate(&self) -> Result<(), RobustError> {
        self.base.validate()?;
        if self.base.quadratic.is_some() || !self.base.soc_constraints.is_empty() {
            return Err(RobustError::NotLinear);
        }
        let rows = self.base.ineq_constraints.len();
        if self.row_uncertainty.len() != rows {
            return Err(RobustError::RowCount { expected: rows, got: self.row_uncertainty.len() });
        }
        let n = self.base.n_vars;
        let shape = |row, what, expected: String, got: String| RobustError::Shape { row, what, expected, got };
        for (row, u) in self.row_uncertainty.iter().enumerate() {
            match u {
                RowUncertainty::None => {}
                RowUncertainty::Ellipsoidal { nominal, shape: delta, radius } => {
                    if nominal.len() != n {
                        return Err(shape(row, "nominal row", n.to_string(), nominal.len().to_string()));
                    }
                    if delta.ncols() != n {
                        return Err(shape(row, "shape matrix", format!("k x {n}"), format!("{}x{}", delta.nrows(), delta.ncols())));
                    }
                    if !(*radius >= 0.0) {
                        return Err(RobustError::Negative(row, format!("radius {radius} must be >= 0")));
                    }
                }
                RowUncertainty::Polyhedral { d_mat, d_vec } => {
                    if d_mat.ncols() != n || d_mat.nrows() != d_vec.len() {
                        return Err(shape(
                            row,
                            "polytope",
                            format!("r x {n} with r-vector"),
                            format!("{}x{} with {}-vector", d_mat.nrows(), d_mat.ncols(), d_vec.len()),
                        ));
                    }
                }
                RowUncertainty::Cardinality { nominal, deviation, budget } => {
                    if nominal.len() != n || deviation.len() != n {
                        return Err(shape(row, "nominal/deviation", n.to_string(), format!("{}/{}", nominal.len(), deviation.len())));
                    }
                    if deviation.iter().any(|v| !(*v >= 0.0)) {
                        return Err(RobustError::Negative(row, "deviations must be >= 0".into()));
                    }
                    if !(*budget >= 0.0 && *budget <= n as f64) {
                        return Err(RobustError::BudgetOutOfRange { row, gamma: *budget, n });
                    }
                }
                RowUncertainty::Norm { m, radius, .. } => {
                    if m.nrows() != n || m.ncols() != n {
                        return Err(shape(row, "norm matrix", format!("{n}x{n}"), format!("{}x{}", m.nrows(), m.ncols())));
                    }
                    if !(*radius >= 0.0) {
                        return Err(RobustError::Negative(row, format!("radius {radius} must be >= 0")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn dense_terms(v: &[f64]) -> Terms {
    v.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect()
}

fn row_dense(terms: &Terms, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(j, c) in terms {
        v[j] += c;
    }
    v
}

/// Appends the counterpart of one row to `out` (which already holds the
/// original variables and any earlier auxiliaries).
fn emit_row(out: &mut Builder, row: usize, base: &LinearRow, u: &RowUncertainty) -> Result<(), RobustError> {
    let n = out.n_orig;
    match u {
        RowUncertainty::None => out.prog.ineq_constraints.push(base.clone()),
        RowUncertainty::Ellipsoidal { nominal, shape, radius } => {
            let nominal_terms = dense_terms(nominal);
            if *radius == 0.0 || shape.nrows() == 0 {
                out.prog.add_le(nominal_terms, base.rhs);
            } else {
                // ‖ρ Δ x‖ ≤ b − a⁰·x
                let rows: Vec<Terms> = (0..shape.nrows())
                    .map(|k| dense_terms(&(0..n).map(|j| radius * shape[(k, j)]).collect::<Vec<_>>()))
                    .collect();
                let g = nominal_terms.into_iter().map(|(j, v)| (j, -v)).collect();
                out.prog.add_soc(rows, vec![0.0; shape.nrows()], g, base.rhs);
            }
        }
        RowUncertainty::Polyhedral { d_mat, d_vec } => {
            check_polytope(row, d_mat, d_vec)?;
            // max{a·x : D a ≤ d} = min{d·p : Dᵀp = x, p ≥ 0}
            let r = d_mat.nrows();
            let p0 = out.prog.add_vars(r);
            out.prog.set_nonneg(p0..p0 + r);
            for j in 0..n {
                let mut terms: Terms = (0..r).filter(|&k| d_mat[(k, j)] != 0.0).map(|k| (p0 + k, d_mat[(k, j)])).collect();
                terms.push((j, -1.0));
                out.prog.add_eq(terms, 0.0);
            }
            out.prog.add_le((0..r).map(|k| (p0 + k, d_vec[k])).collect(), base.rhs);
        }
        RowUncertainty::Cardinality { nominal, deviation, budget } => {
            // a⁰x + Γυ + Σ n_j ≤ b,  υ + n_j ≥ â_j ϱ_j,  −ϱ ≤ x ≤ ϱ
            let ups = out.prog.add_vars(1);
            let nv = out.prog.add_vars(n);
            let rho = out.prog.add_vars(n);
            out.prog.set_nonneg(ups..rho + n);
            let mut terms = dense_terms(nominal);
            terms.push((ups, *budget));
            terms.extend((0..n).map(|j| (nv + j, 1.0)));
            out.prog.add_le(terms, base.rhs);
            for j in 0..n {
                out.prog.add_le(vec![(rho + j, deviation[j]), (ups, -1.0), (nv + j, -1.0)], 0.0);
                out.prog.add_le(vec![(j, 1.0), (rho + j, -1.0)], 0.0);
                out.prog.add_le(vec![(j, -1.0), (rho + j, -1.0)], 0.0);
            }
        }
        RowUncertainty::Norm { m, radius, p } => {
            let minv_t = m.transpose().try_inverse().ok_or(RobustError::SingularMatrix { row })?;
            if minv_t.iter().any(|v| !v.is_finite()) {
                return Err(RobustError::SingularMatrix { row });
            }
            if *radius == 0.0 {
                out.prog.ineq_constraints.push(base.clone());
                return Ok(());
            }
            let lin = |k: usize| -> Terms { dense_terms(&(0..n).map(|j| minv_t[(k, j)]).collect::<Vec<_>>()) };
            match p {
                NormKind::L2 => {
                    let rows = (0..n).map(|k| lin(k).into_iter().map(|(j, v)| (j, radius * v)).collect()).collect();
                    let g = base.terms.iter().map(|&(j, v)| (j, -v)).collect();
                    out.prog.add_soc(rows, vec![0.0; n], g, base.rhs);
                }
                NormKind::L1 | NormKind::Inf => {
                    // dual ∞-norm: one bound t; dual 1-norm: one bound per entry
                    let count = if *p == NormKind::L1 { 1 } else { n };
                    let t0 = out.prog.add_vars(count);
                    out.prog.set_nonneg(t0..t0 + count);
                    let mut terms = base.terms.clone();
                    terms.extend((0..count).map(|k| (t0 + k, *radius)));
                    out.prog.add_le(terms, base.rhs);
                    for k in 0..n {
                        let t = t0 + if count == 1 { 0 } else { k };
                        let mut up = lin(k);
                        up.push((t, -1.0));
                        out.prog.add_le(up, 0.0);
                        let mut lo: Terms = lin(k).into_iter().map(|(j, v)| (j, -v)).collect();
                        lo.push((t, -1.0));
                        out.prog.add_le(lo, 0.0);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Bounded and nonempty, checked with small LPs.
fn check_polytope(row: usize, d_mat: &DMatrix<f64>, d_vec: &[f64]) -> Result<(), RobustError> {
    let n = d_mat.ncols();
    let settings = SolverSettings::with_tolerance(1e-9);
    let mut feas = ConicProgram::new(n, Sense::Minimize);
    for k in 0..d_mat.nrows() {
        feas.add_le((0..n).map(|j| (j, d_mat[(k, j)])).collect(), d_vec[k]);
    }
    let sol = solve(&feas, &settings)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(RobustError::InvalidPolytope { row, what: "empty" });
    }
    // recession cone {y : D y ≤ 0} must be {0}
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut rec = ConicProgram::new(n, Sense::Maximize);
            rec.linear_cost[j] = sign;
            for k in 0..d_mat.nrows() {
                rec.add_le((0..n).map(|i| (i, d_mat[(k, i)])).collect(), 0.0);
            }
            for i in 0..n {
                rec.set_lower(i, -1.0);
                rec.set_upper(i, 1.0);
            }
            let s = solve(&rec, &settings)?;
            if s.status == SolveStatus::Optimal && s.objective > 1e-7 {
                return Err(RobustError::InvalidPolytope { row, what: "unbounded" });
            }
        }
    }
    Ok(())
}

/// Output program plus the number of variables of the base LP.
struct Builder {
    prog: ConicProgram,
    n_orig: usize,
}

fn transform(u: &UncertainLP, allowed: Option<&'static str>) -> Result<ConicProgram, RobustError> {
    u.validate()?;
    if let Some(expected) = allowed {
        for (row, ru) in u.row_uncertainty.iter().enumerate() {
            let found = ru.name();
            if found != "none" && found != expected {
                return Err(RobustError::WrongKind { row, found, expected });
            }
        }
    }
    let mut prog = u.base.clone();
    prog.ineq_constraints.clear();
    let mut b = Builder { prog, n_orig: u.base.n_vars };
    for (row, (base_row, ru)) in u.base.ineq_constraints.iter().zip(&u.row_uncertainty).enumerate() {
        emit_row(&mut b, row, base_row, ru)?;
    }
    Ok(b.prog)
}

/// Counterpart of every uncertain row, whatever its kind.
pub fn robust_counterpart(u: &UncertainLP) -> Result<ConicProgram, RobustError> {
    transform(u, None)
}

/// Rows become `‖ρ Δ x‖₂ ≤ b − a⁰·x`.
pub fn ellipsoidal_rc(u: &UncertainLP) -> Result<ConicProgram, RobustError> {
    transform(u, Some("ellipsoidal"))
}

/// Rows are dualized: `p ≥ 0`, `Dᵀp = x`, `d·p ≤ b`.
pub fn polyhedral_rc(u: &UncertainLP) -> Result<ConicProgram, RobustError> {
    transform(u, Some("polyhedral"))
}

/// Budget-of-uncertainty protected rows as an LP.
pub fn cardinality_rc(u: &UncertainLP) -> Result<ConicProgram, RobustError> {
    transform(u, Some("cardinality"))
}

/// Rows become `ā·x + Δ ‖M⁻ᵀx‖_* ≤ b`.
pub fn norm_rc(u: &UncertainLP) -> Result<ConicProgram, RobustError> {
    transform(u, Some("norm"))
}

/// Worst-case left-hand side `max_{a ∈ U} a·x` of one row, in closed form.
pub fn worst_case_lhs(base: &LinearRow, u: &RowUncertainty, x: &[f64]) -> f64 {
    let n = x.len();
    let dot = |a: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    match u {
        RowUncertainty::None => dot(&row_dense(&base.terms, n)),
        RowUncertainty::Ellipsoidal { nominal, shape, radius } => {
            let dx = shape * DVector::from_column_slice(x);
            dot(nominal) + radius * dx.norm()
        }
        RowUncertainty::Polyhedral { d_mat, d_vec } => {
            let mut p = ConicProgram::new(n, Sense::Maximize);
            p.linear_cost = x.to_vec();
            for k in 0..d_mat.nrows() {
                p.add_le((0..n).map(|j| (j, d_mat[(k, j)])).collect(), d_vec[k]);
            }
            solve(&p, &SolverSettings::with_tolerance(1e-10)).map(|s| s.objective).unwrap_or(f64::NAN)
        }
        RowUncertainty::Cardinality { nominal, deviation, budget } => {
            let mut dev: Vec<f64> = (0..n).map(|j| deviation[j] * x[j].abs()).collect();
            dev.sort_by(|a, b| b.total_cmp(a));
            let whole = budget.floor() as usize;
            let frac = budget - budget.floor();
            let mut extra: f64 = dev.iter().take(whole).sum();
            if whole < n {
                extra += frac * dev[whole];
            }
            dot(nominal) + extra
        }
        RowUncertainty::Norm { m, radius, p } => {
            let center = dot(&row_dense(&base.terms, n));
            match m.transpose().try_inverse() {
                Some(minv_t) => {
                    let v = minv_t * DVector::from_column_slice(x);
                    center + radius * dual_norm(v.as_slice(), *p)
                }
                None => f64::NAN,
            }
        }
    }
}

#[cfg(test)]
mod tests;
