//! Canonical conic programs and the interior-point solver behind them.

mod cones;
mod solver;
mod sparse;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use solver::{solve, Diagnostics, SolveStatus, Solution, SolverSettings};

use crate::estimation::{cholesky, PsdPolicy};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },
    #[error("{what}: variable index {index} out of range for {n_vars} variables")]
    IndexOutOfRange { what: String, index: usize, n_vars: usize },
    #[error("{0} contains a non-finite value")]
    NonFinite(String),
    #[error("quadratic term is not symmetric")]
    QuadraticNotSymmetric,
    #[error("quadratic term is not positive semidefinite (min eigenvalue {0:e})")]
    QuadraticNotPsd(f64),
    #[error("variable {index}: lower bound {lower} exceeds upper bound {upper}")]
    InvertedBounds { index: usize, lower: f64, upper: f64 },
    #[error("second-order cone {0} has no rows")]
    EmptyCone(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Sparse linear form `Σ coef · x[index]`.
pub type Terms = Vec<(usize, f64)>;

/// `terms · x (= or ≤) rhs`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub terms: Terms,
    pub rhs: f64,
}

/// `‖A x + b‖₂ ≤ g · x + h`, with `A` given row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub rows: Vec<Terms>,
    pub offsets: Vec<f64>,
    pub g: Terms,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VarBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Optimize `c·x + d ± xᵀQx` over linear and second-order cone constraints.
///
/// The quadratic term is added when minimizing and subtracted when
/// maximizing, so a PSD `Q` always keeps the program convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub sense: Sense,
    pub linear_cost: Vec<f64>,
    pub constant: f64,
    pub quadratic: Option<DMatrix<f64>>,
    pub eq_constraints: Vec<LinearRow>,
    pub ineq_constraints: Vec<LinearRow>,
    pub soc_constraints: Vec<SocConstraint>,
    pub bounds: Vec<VarBounds>,
}

impl ConicProgram {
    pub fn new(n_vars: usize, sense: Sense) -> Self {
        Self {
            n_vars,
            sense,
            linear_cost: vec![0.0; n_vars],
            constant: 0.0,
            quadratic: None,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            soc_constraints: Vec::new(),
            bounds: vec![VarBounds::default(); n_vars],
        }
    }

    /// Appends `count` unbounded variables and returns the index of the first.
    pub fn add_vars(&mut self, count: usize) -> usize {
        let first = self.n_vars;
        self.n_vars += count;
        self.linear_cost.resize(self.n_vars, 0.0);
        self.bounds.resize(self.n_vars, VarBounds::default());
        if let Some(q) = self.quadratic.take() {
            let mut grown = DMatrix::zeros(self.n_vars, self.n_vars);
            grown.view_mut((0, 0), (q.nrows(), q.ncols())).copy_from(&q);
            self.quadratic = Some(grown);
        }
        first
    }

    pub fn add_eq(&mut self, terms: Terms, rhs: f64) {
        self.eq_constraints.push(LinearRow { terms, rhs });
    }

    /// `terms · x ≤ rhs`
    pub fn add_le(&mut self, terms: Terms, rhs: f64) {
        self.ineq_constraints.push(LinearRow { terms, rhs });
    }

    /// `terms · x ≥ rhs`
    pub fn add_ge(&mut self, terms: Terms, rhs: f64) {
        let negated = terms.into_iter().map(|(j, v)| (j, -v)).collect();
        self.ineq_constraints.push(LinearRow { terms: negated, rhs: -rhs });
    }

    pub fn add_soc(&mut self, rows: Vec<Terms>, offsets: Vec<f64>, g: Terms, h: f64) {
        self.soc_constraints.push(SocConstraint { rows, offsets, g, h });
    }

    pub fn set_lower(&mut self, j: usize, lower: f64) {
        self.bounds[j].lower = Some(lower);
    }

    pub fn set_upper(&mut self, j: usize, upper: f64) {
        self.bounds[j].upper = Some(upper);
    }

    pub fn set_nonneg(&mut self, vars: std::ops::Range<usize>) {
        for j in vars {
            self.set_lower(j, 0.0);
        }
    }

    /// Adds `scale · xᵀ M x` over the listed variables to the quadratic term.
    pub fn add_quadratic(&mut self, vars: &[usize], m: &DMatrix<f64>, scale: f64) {
        let q = self.quadratic.get_or_insert_with(|| DMatrix::zeros(self.n_vars, self.n_vars));
        for (a, &i) in vars.iter().enumerate() {
            for (b, &j) in vars.iter().enumerate() {
                q[(i, j)] += scale * m[(a, b)];
            }
        }
    }

    /// Objective in the program's own sense.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant + dot_dense(&self.linear_cost, x);
        if let Some(q) = &self.quadratic {
            let quad = quad_form(q, x);
            v += match self.sense {
                Sense::Minimize => quad,
                Sense::Maximize => -quad,
            };
        }
        v
    }

    /// Checks dimensions, indices, finiteness and PSD-ness of `Q`.
    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.n_vars;
        let len = |what: &str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(ConicError::DimensionMismatch { what: what.into(), expected, got })
            }
        };
        len("linear cost", n, self.linear_cost.len())?;
        len("bounds", n, self.bounds.len())?;
        finite("linear cost", self.linear_cost.iter().copied())?;
        finite("objective constant", std::iter::once(self.constant))?;
        let check_terms = |what: String, terms: &Terms| -> Result<(), ConicError> {
            for &(j, v) in terms {
                if j >= n {
                    return Err(ConicError::IndexOutOfRange { what, index: j, n_vars: n });
                }
                if !v.is_finite() {
                    return Err(ConicError::NonFinite(what));
                }
            }
            Ok(())
        };
        for (i, r) in self.eq_constraints.iter().enumerate() {
            check_terms(format!("equality {i}"), &r.terms)?;
            finite(&format!("equality {i}"), std::iter::once(r.rhs))?;
        }
        for (i, r) in self.ineq_constraints.iter().enumerate() {
            check_terms(format!("inequality {i}"), &r.terms)?;
            finite(&format!("inequality {i}"), std::iter::once(r.rhs))?;
        }
        for (i, c) in self.soc_constraints.iter().enumerate() {
            if c.rows.is_empty() {
                return Err(ConicError::EmptyCone(i));
            }
            len(&format!("cone {i} offsets"), c.rows.len(), c.offsets.len())?;
            for r in &c.rows {
                check_terms(format!("cone {i}"), r)?;
            }
            check_terms(format!("cone {i}"), &c.g)?;
            finite(&format!("cone {i}"), c.offsets.iter().copied().chain(std::iter::once(c.h)))?;
        }
        for (j, b) in self.bounds.iter().enumerate() {
            let lo = b.lower.unwrap_or(f64::NEG_INFINITY);
            let hi = b.upper.unwrap_or(f64::INFINITY);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(ConicError::NonFinite(format!("bounds of variable {j}")));
            }
            if lo > hi {
                return Err(ConicError::InvertedBounds { index: j, lower: lo, upper: hi });
            }
        }
        if let Some(q) = &self.quadratic {
            len("quadratic rows", n, q.nrows())?;
            len("quadratic columns", n, q.ncols())?;
            finite("quadratic", q.iter().copied())?;
            let scale = q.amax().max(1.0);
            for i in 0..n {
                for j in 0..i {
                    if (q[(i, j)] - q[(j, i)]).abs() > 1e-8 * scale {
                        return Err(ConicError::QuadraticNotSymmetric);
                    }
                }
            }
            if n > 0 && q.amax() > 0.0 {
                let min_eig = nalgebra::SymmetricEigen::new(q.clone()).eigenvalues.min();
                if min_eig < -1e-8 * scale {
                    return Err(ConicError::QuadraticNotPsd(min_eig));
                }
            }
        }
        Ok(())
    }

    /// Replaces the quadratic term by an epigraph variable and a rotated cone.
    ///
    /// With `FᵀF = Q`, the new last variable `s` satisfies
    /// `‖(2Fx, 1 − s)‖ ≤ 1 + s`, which is `xᵀQx ≤ s`.
    pub fn qp_to_socp(&self) -> Result<ConicProgram, ConicError> {
        self.validate()?;
        let mut out = self.clone();
        let Some(q) = out.quadratic.take() else {
            return Ok(out);
        };
        if q.iter().all(|&v| v == 0.0) {
            return Ok(out);
        }
        let c = cholesky(&q, PsdPolicy::Strict).map_err(|e| match e {
            crate::estimation::EstimationError::NotPsd(v) => ConicError::QuadraticNotPsd(v),
            _ => ConicError::QuadraticNotSymmetric,
        })?;
        let n = self.n_vars;
        let s = out.add_vars(1);
        out.linear_cost[s] = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        // rows of F = Cᵀ are columns of C
        let mut rows = Vec::new();
        let mut offsets = Vec::new();
        for k in 0..n {
            let terms: Terms = (0..n)
                .filter(|&j| c[(j, k)] != 0.0)
                .map(|j| (j, 2.0 * c[(j, k)]))
                .collect();
            if !terms.is_empty() {
                rows.push(terms);
                offsets.push(0.0);
            }
        }
        rows.push(vec![(s, -1.0)]);
        offsets.push(1.0);
        out.add_soc(rows, offsets, vec![(s, 1.0)], 1.0);
        out.set_lower(s, 0.0);
        Ok(out)
    }

    /// Listing of the program in an LP-like text format, for inspection only.
    pub fn to_lp_string(&self) -> String {
        self.to_string()
    }
}

fn finite(what: &str, mut it: impl Iterator<Item = f64>) -> Result<(), ConicError> {
    if it.all(f64::is_finite) {
        Ok(())
    } else {
        Err(ConicError::NonFinite(what.into()))
    }
}

fn dot_dense(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

pub(crate) fn dot_terms(terms: &Terms, x: &[f64]) -> f64 {
    terms.iter().map(|&(j, v)| v * x[j]).sum()
}

fn quad_form(q: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for j in 0..n {
        if x[j] == 0.0 {
            continue;
        }
        for i in 0..n {
            acc += x[i] * q[(i, j)] * x[j];
        }
    }
    acc
}

/// Violations above tolerance, grouped by constraint class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `(row, |a·x − b|)`
    pub eq: Vec<(usize, f64)>,
    /// `(row, a·x − b)`
    pub ineq: Vec<(usize, f64)>,
    /// `(cone, ‖Ax + b‖ − (g·x + h))`
    pub soc: Vec<(usize, f64)>,
    /// `(variable, distance outside its bounds)`
    pub bounds: Vec<(usize, f64)>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.eq.is_empty() && self.ineq.is_empty() && self.soc.is_empty() && self.bounds.is_empty()
    }

    /// Largest violation over all classes (0 when feasible).
    pub fn max_violation(&self) -> f64 {
        [&self.eq, &self.ineq, &self.soc, &self.bounds]
            .iter()
            .flat_map(|v| v.iter().map(|e| e.1))
            .fold(0.0, f64::max)
    }
}

/// Reports every constraint that `x` violates by more than `tol`.
pub fn check_feasibility(p: &ConicProgram, x: &[f64], tol: f64) -> Result<FeasibilityReport, ConicError> {
    if x.len() != p.n_vars {
        return Err(ConicError::DimensionMismatch { what: "point".into(), expected: p.n_vars, got: x.len() });
    }
    let mut rep = FeasibilityReport::default();
    for (i, r) in p.eq_constraints.iter().enumerate() {
        let v = (dot_terms(&r.terms, x) - r.rhs).abs();
        if v > tol {
            rep.eq.push((i, v));
        }
    }
    for (i, r) in p.ineq_constraints.iter().enumerate() {
        let v = dot_terms(&r.terms, x) - r.rhs;
        if v > tol {
            rep.ineq.push((i, v));
        }
    }
    for (i, c) in p.soc_constraints.iter().enumerate() {
        let lhs = c
            .rows
            .iter()
            .zip(&c.offsets)
            .map(|(r, b)| (dot_terms(r, x) + b).powi(2))
            .sum::<f64>()
            .sqrt();
        let v = lhs - (dot_terms(&c.g, x) + c.h);
        if v > tol {
            rep.soc.push((i, v));
        }
    }
    for (j, b) in p.bounds.iter().enumerate() {
        let below = b.lower.map_or(0.0, |l| l - x[j]);
        let above = b.upper.map_or(0.0, |u| x[j] - u);
        let v = below.max(above);
        if v > tol {
            rep.bounds.push((j, v));
        }
    }
    Ok(rep)
}

fn write_terms(f: &mut fmt::Formatter<'_>, terms: &Terms) -> fmt::Result {
    if terms.is_empty() {
        return write!(f, "0");
    }
    for (k, &(j, v)) in terms.iter().enumerate() {
        if k == 0 {
            write!(f, "{v} x{j}")?;
        } else if v < 0.0 {
            write!(f, " - {} x{j}", -v)?;
        } else {
            write!(f, " + {v} x{j}")?;
        }
    }
    Ok(())
}

impl fmt::Display for ConicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dense: Terms = self
            .linear_cost
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        writeln!(f, "{}", match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        })?;
        write!(f, "  obj: ")?;
        write_terms(f, &dense)?;
        if self.constant != 0.0 {
            write!(f, " + {}", self.constant)?;
        }
        if let Some(q) = &self.quadratic {
            let sign = if self.sense == Sense::Minimize { "+" } else { "-" };
            write!(f, " {sign} [")?;
            let mut first = true;
            for i in 0..self.n_vars {
                for j in i..self.n_vars {
                    let v = if i == j { q[(i, i)] } else { q[(i, j)] + q[(j, i)] };
                    if v != 0.0 {
                        if !first {
                            write!(f, " + ")?;
                        }
                        first = false;
                        write!(f, "{v} x{i} * x{j}")?;
                    }
                }
            }
            write!(f, " ]")?;
        }
        writeln!(f)?;
        writeln!(f, "subject to")?;
        for (i, r) in self.eq_constraints.iter().enumerate() {
            write!(f, "  e{i}: ")?;
            write_terms(f, &r.terms)?;
            writeln!(f, " = {}", r.rhs)?;
        }
        for (i, r) in self.ineq_constraints.iter().enumerate() {
            write!(f, "  i{i}: ")?;
            write_terms(f, &r.terms)?;
            writeln!(f, " <= {}", r.rhs)?;
        }
        for (i, c) in self.soc_constraints.iter().enumerate() {
            write!(f, "  q{i}: || ")?;
            for (k, (r, b)) in c.rows.iter().zip(&c.offsets).enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "(")?;
                write_terms(f, r)?;
                write!(f, " + {b})")?;
            }
            write!(f, " || <= ")?;
            write_terms(f, &c.g)?;
            writeln!(f, " + {}", c.h)?;
        }
        writeln!(f, "bounds")?;
        for (j, b) in self.bounds.iter().enumerate() {
            match (b.lower, b.upper) {
                (None, None) => writeln!(f, "  x{j} free")?,
                (Some(l), None) => writeln!(f, "  x{j} >= {l}")?,
                (None, Some(u)) => writeln!(f, "  x{j} <= {u}")?,
                (Some(l), Some(u)) => writeln!(f, "  {l} <= x{j} <= {u}")?,
            }
        }
        write!(f, "end")
    }
}
