//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! The program is mapped to
//! `min ½xᵀPx + qᵀx  s.t.  Ax + s = b,  s ∈ {0}ᵖ × ℝ₊ᵐ × SOC × … × SOC`
//! and solved with Mehrotra predictor-corrector steps under
//! Nesterov-Todd scaling. Each Newton system is reduced to a
//! quasi-definite KKT matrix factored by a sparse LDLᵀ.

use serde::{Deserialize, Serialize};

use super::cones::{Cone, ConeKind};
use super::sparse::{minimum_degree, Csc, LdlFactor, LdlSymbolic, PivotGuard};
use super::{ConicError, ConicProgram, Sense};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Relative primal and dual residual tolerance.
    pub feasibility_tol: f64,
    pub gap_abs_tol: f64,
    pub gap_rel_tol: f64,
    /// Tolerance on infeasibility certificates.
    pub infeasibility_tol: f64,
    /// Ruiz equilibration of the data before solving.
    pub equilibrate: bool,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            feasibility_tol: 1e-6,
            gap_abs_tol: 1e-8,
            gap_rel_tol: 1e-6,
            infeasibility_tol: 1e-8,
            equilibrate: true,
            step_fraction: 0.99,
        }
    }
}

impl SolverSettings {
    /// Settings with every convergence tolerance set to `tol`.
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            feasibility_tol: tol,
            gap_abs_tol: tol,
            gap_rel_tol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// Pivots replaced by dynamic regularization in the last factorization.
    pub regularized_pivots: usize,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Last primal iterate (the optimum when `status` is optimal).
    pub x: Vec<f64>,
    /// Objective in the program's sense; `±∞` for infeasible or unbounded.
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

const STATIC_REG: f64 = 1e-8;
const DYN_EPS: f64 = 1e-13;
const DYN_DELTA: f64 = 2e-7;
const REFINE_MAX: usize = 10;
const EQUIL_ITERS: usize = 10;

/// Problem data in cone form.
struct ConeForm {
    n: usize,
    m: usize,
    /// Upper triangle of `P`.
    p: Csc,
    q: Vec<f64>,
    a: Csc,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

fn compile(prog: &ConicProgram) -> ConeForm {
    let n = prog.n_vars;
    let sign = match prog.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let q: Vec<f64> = prog.linear_cost.iter().map(|c| sign * c).collect();
    let mut p_trip = Vec::new();
    if let Some(qm) = &prog.quadratic {
        for j in 0..n {
            for i in 0..=j {
                let v = if i == j { 2.0 * qm[(i, i)] } else { qm[(i, j)] + qm[(j, i)] };
                if v != 0.0 {
                    p_trip.push((i, j, v));
                }
            }
        }
    }
    let mut a_trip = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut row = 0;
    let mut push_row = |terms: &[(usize, f64)], rhs: f64, a_trip: &mut Vec<_>, b: &mut Vec<f64>| {
        for &(j, v) in terms {
            if v != 0.0 {
                a_trip.push((row, j, v));
            }
        }
        b.push(rhs);
        row += 1;
    };
    for r in &prog.eq_constraints {
        push_row(&r.terms, r.rhs, &mut a_trip, &mut b);
    }
    if !prog.eq_constraints.is_empty() {
        cones.push(Cone::new(ConeKind::Zero, 0..b.len()));
    }
    let start = b.len();
    for r in &prog.ineq_constraints {
        push_row(&r.terms, r.rhs, &mut a_trip, &mut b);
    }
    for (j, bd) in prog.bounds.iter().enumerate() {
        if let Some(u) = bd.upper {
            push_row(&[(j, 1.0)], u, &mut a_trip, &mut b);
        }
        if let Some(l) = bd.lower {
            push_row(&[(j, -1.0)], -l, &mut a_trip, &mut b);
        }
    }
    if b.len() > start {
        cones.push(Cone::new(ConeKind::Nonneg, start..b.len()));
    }
    for c in &prog.soc_constraints {
        let start = b.len();
        // s = (g·x + h, A x + b) in cone form reads s = b' − A' x
        let neg: Vec<(usize, f64)> = c.g.iter().map(|&(j, v)| (j, -v)).collect();
        push_row(&neg, c.h, &mut a_trip, &mut b);
        for (r, off) in c.rows.iter().zip(&c.offsets) {
            let neg: Vec<(usize, f64)> = r.iter().map(|&(j, v)| (j, -v)).collect();
            push_row(&neg, *off, &mut a_trip, &mut b);
        }
        cones.push(Cone::new(ConeKind::Soc, start..b.len()));
    }
    let m = b.len();
    ConeForm {
        n,
        m,
        p: Csc::from_triplets(n, n, &p_trip),
        q,
        a: Csc::from_triplets(m, n, &a_trip),
        b,
        cones,
    }
}

/// Ruiz scaling: returns column scales `d` and row scales `e`, data scaled in place.
fn equilibrate(f: &mut ConeForm) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![1.0; f.n];
    let mut e = vec![1.0; f.m];
    let clamp = |v: f64| if v == 0.0 { 1.0 } else { v.clamp(1e-4, 1e4) };
    for _ in 0..EQUIL_ITERS {
        let mut col = vec![0.0f64; f.n];
        let mut row = vec![0.0f64; f.m];
        for c in 0..f.n {
            for k in f.p.colptr[c]..f.p.colptr[c + 1] {
                let r = f.p.rowval[k];
                let v = f.p.nzval[k].abs();
                col[c] = col[c].max(v);
                col[r] = col[r].max(v);
            }
            for k in f.a.colptr[c]..f.a.colptr[c + 1] {
                let v = f.a.nzval[k].abs();
                col[c] = col[c].max(v);
                row[f.a.rowval[k]] = row[f.a.rowval[k]].max(v);
            }
        }
        for cone in &f.cones {
            if cone.kind == ConeKind::Soc {
                let mx = row[cone.range.clone()].iter().copied().fold(0.0, f64::max);
                row[cone.range.clone()].iter_mut().for_each(|v| *v = mx);
            }
        }
        let dc: Vec<f64> = col.iter().map(|&v| 1.0 / clamp(v).sqrt()).collect();
        let er: Vec<f64> = row.iter().map(|&v| 1.0 / clamp(v).sqrt()).collect();
        for c in 0..f.n {
            for k in f.p.colptr[c]..f.p.colptr[c + 1] {
                f.p.nzval[k] *= dc[f.p.rowval[k]] * dc[c];
            }
            for k in f.a.colptr[c]..f.a.colptr[c + 1] {
                f.a.nzval[k] *= er[f.a.rowval[k]] * dc[c];
            }
        }
        for j in 0..f.n {
            d[j] *= dc[j];
        }
        for i in 0..f.m {
            e[i] *= er[i];
        }
    }
    for j in 0..f.n {
        f.q[j] *= d[j];
    }
    for i in 0..f.m {
        f.b[i] *= e[i];
    }
    (d, e)
}

/// KKT matrix `[P + δI, Aᵀ; A, −(H + δI)]` with a fixed sparsity pattern.
struct Kkt {
    dim: usize,
    perm: Vec<usize>,
    /// Triplets in original indexing.
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Static regularization added on the diagonal of the factored matrix.
    reg: Vec<f64>,
    dest: Vec<usize>,
    diag_dest: Vec<usize>,
    hess_offsets: Vec<usize>,
    upper: Csc,
    symbolic: LdlSymbolic,
    signs: Vec<f64>,
    factor: Option<LdlFactor>,
}

impl Kkt {
    fn new(f: &ConeForm) -> Self {
        let n = f.n;
        let dim = f.n + f.m;
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for c in 0..n {
            for k in f.p.colptr[c]..f.p.colptr[c + 1] {
                rows.push(f.p.rowval[k]);
                cols.push(c);
                vals.push(f.p.nzval[k]);
            }
            for k in f.a.colptr[c]..f.a.colptr[c + 1] {
                rows.push(c);
                cols.push(n + f.a.rowval[k]);
                vals.push(f.a.nzval[k]);
            }
        }
        let mut hess_offsets = Vec::with_capacity(f.cones.len());
        let mut local = Vec::new();
        for cone in &f.cones {
            hess_offsets.push(rows.len());
            local.clear();
            cone.hessian_upper(&mut local);
            for &(i, j, _) in &local {
                rows.push(n + cone.range.start + i);
                cols.push(n + cone.range.start + j);
                vals.push(0.0);
            }
        }
        let mut edges: Vec<(usize, usize)> = rows.iter().zip(&cols).map(|(&r, &c)| (r, c)).collect();
        edges.retain(|(r, c)| r != c);
        let perm = minimum_degree(dim, &edges);
        let mut inv = vec![0usize; dim];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mapped = |r: usize, c: usize| {
            let (a, b) = (inv[r], inv[c]);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        };
        let mut pattern: Vec<(usize, usize, f64)> =
            rows.iter().zip(&cols).map(|(&r, &c)| { let (a, b) = mapped(r, c); (a, b, 0.0) }).collect();
        for i in 0..dim {
            pattern.push((i, i, 0.0));
        }
        let upper = Csc::from_triplets(dim, dim, &pattern);
        let locate = |r: usize, c: usize| -> usize {
            let (a, b) = mapped(r, c);
            let lo = upper.colptr[b];
            let hi = upper.colptr[b + 1];
            lo + upper.rowval[lo..hi].binary_search(&a).expect("pattern entry")
        };
        let dest: Vec<usize> = rows.iter().zip(&cols).map(|(&r, &c)| locate(r, c)).collect();
        let diag_dest: Vec<usize> = (0..dim).map(|i| locate(i, i)).collect();
        let symbolic = LdlSymbolic::analyze(&upper);
        let signs: Vec<f64> = perm.iter().map(|&o| if o < n { 1.0 } else { -1.0 }).collect();
        let reg: Vec<f64> = (0..dim).map(|i| if i < n { STATIC_REG } else { -STATIC_REG }).collect();
        Self {
            dim,
            perm,
            rows,
            cols,
            vals,
            reg,
            dest,
            diag_dest,
            hess_offsets,
            upper,
            symbolic,
            signs,
            factor: None,
        }
    }

    /// Sets the lower-right block to `−H` (or `−I` when `identity`).
    fn set_hessian(&mut self, cones: &[Cone], identity: bool) {
        let mut local = Vec::new();
        for (cone, &off) in cones.iter().zip(&self.hess_offsets) {
            local.clear();
            cone.hessian_upper(&mut local);
            for (k, &(i, j, v)) in local.iter().enumerate() {
                self.vals[off + k] = if identity { if i == j { -1.0 } else { 0.0 } } else { -v };
            }
        }
    }

    fn factor(&mut self) -> usize {
        self.upper.nzval.iter_mut().for_each(|v| *v = 0.0);
        for (k, &d) in self.dest.iter().enumerate() {
            self.upper.nzval[d] += self.vals[k];
        }
        for (i, &d) in self.diag_dest.iter().enumerate() {
            self.upper.nzval[d] += self.reg[i];
        }
        let f = LdlFactor::factor(
            &self.symbolic,
            &self.upper,
            &self.signs,
            PivotGuard { eps: DYN_EPS, delta: DYN_DELTA },
        );
        let bumped = f.bumped;
        self.factor = Some(f);
        bumped
    }

    /// `y = K x` without static regularization.
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..self.rows.len() {
            let (r, c, v) = (self.rows[k], self.cols[k], self.vals[k]);
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
    }

    fn solve_raw(&self, rhs: &[f64], out: &mut [f64]) {
        let f = self.factor.as_ref().expect("factored");
        let mut tmp: Vec<f64> = self.perm.iter().map(|&o| rhs[o]).collect();
        f.solve_in_place(&mut tmp);
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = tmp[new];
        }
    }

    /// Solves with iterative refinement against the unregularized matrix.
    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        self.solve_raw(rhs, out);
        let norm_b = inf_norm(rhs);
        let mut r = vec![0.0; self.dim];
        let mut dx = vec![0.0; self.dim];
        let mut kx = vec![0.0; self.dim];
        self.mul(out, &mut kx);
        for i in 0..self.dim {
            r[i] = rhs[i] - kx[i];
        }
        let mut err = inf_norm(&r);
        for _ in 0..REFINE_MAX {
            if err <= 1e-12 + 1e-13 * norm_b {
                break;
            }
            self.solve_raw(&r, &mut dx);
            let trial: Vec<f64> = out.iter().zip(&dx).map(|(a, b)| a + b).collect();
            self.mul(&trial, &mut kx);
            let mut r_new = vec![0.0; self.dim];
            for i in 0..self.dim {
                r_new[i] = rhs[i] - kx[i];
            }
            let err_new = inf_norm(&r_new);
            if err_new >= err {
                break;
            }
            let improved = err / err_new;
            out.copy_from_slice(&trial);
            r = r_new;
            err = err_new;
            if improved < 2.0 {
                break;
            }
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Iterate {
    x: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Step {
    x: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

/// Residual summary in the caller's (unscaled) coordinates.
struct Progress {
    primal: f64,
    dual: f64,
    gap_abs: f64,
    gap_rel: f64,
}

struct Engine<'a> {
    f: &'a ConeForm,
    orig: &'a ConeForm,
    d: Vec<f64>,
    e: Vec<f64>,
    cones: Vec<Cone>,
    kkt: Kkt,
    lambda: Vec<f64>,
    settings: &'a SolverSettings,
}

impl<'a> Engine<'a> {
    fn degree(&self) -> f64 {
        self.cones.iter().map(|c| c.degree()).sum::<usize>() as f64
    }

    fn initial_point(&mut self) -> Iterate {
        let n = self.f.n;
        let m = self.f.m;
        self.kkt.set_hessian(&self.cones, true);
        self.kkt.factor();
        let mut sol = vec![0.0; n + m];
        let mut rhs = vec![0.0; n + m];
        let (x, mut s, mut z);
        if self.f.p.nzval.iter().all(|&v| v == 0.0) {
            // least-norm slack, then least-norm dual
            rhs[n..].copy_from_slice(&self.f.b);
            self.kkt.solve(&rhs, &mut sol);
            x = sol[..n].to_vec();
            s = sol[n..].iter().map(|v| -v).collect::<Vec<_>>();
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n {
                rhs[j] = -self.f.q[j];
            }
            self.kkt.solve(&rhs, &mut sol);
            z = sol[n..].to_vec();
        } else {
            for j in 0..n {
                rhs[j] = -self.f.q[j];
            }
            rhs[n..].copy_from_slice(&self.f.b);
            self.kkt.solve(&rhs, &mut sol);
            x = sol[..n].to_vec();
            z = sol[n..].to_vec();
            s = z.iter().map(|v| -v).collect();
        }
        for cone in &self.cones {
            let r = cone.range.clone();
            if cone.kind == ConeKind::Zero {
                s[r].iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            for u in [&mut s, &mut z] {
                let lo = cone.min_eig(&u[r.clone()]);
                if lo < f64::EPSILON.sqrt() {
                    cone.add_identity(&mut u[r.clone()], 1.0 - lo);
                }
            }
        }
        Iterate { x, z, s, tau: 1.0, kappa: 1.0 }
    }

    fn update_scaling(&mut self, it: &Iterate) {
        for cone in &mut self.cones {
            let r = cone.range.clone();
            cone.update_scaling(&it.s[r.clone()], &it.z[r.clone()]);
            cone.mul_w(&it.z[r.clone()], &mut self.lambda[r]);
        }
    }

    fn progress(&self, it: &Iterate) -> Progress {
        let o = self.orig;
        let inv_tau = 1.0 / it.tau;
        let x: Vec<f64> = (0..o.n).map(|j| self.d[j] * it.x[j] * inv_tau).collect();
        let z: Vec<f64> = (0..o.m).map(|i| self.e[i] * it.z[i] * inv_tau).collect();
        let s: Vec<f64> = (0..o.m).map(|i| it.s[i] / self.e[i] * inv_tau).collect();
        let mut px = vec![0.0; o.n];
        o.p.symv_upper(1.0, &x, &mut px);
        let mut atz = vec![0.0; o.n];
        o.a.gemv_t(1.0, &z, &mut atz);
        let mut ax = vec![0.0; o.m];
        o.a.gemv(1.0, &x, &mut ax);
        let rp: Vec<f64> = (0..o.m).map(|i| ax[i] + s[i] - o.b[i]).collect();
        let rd: Vec<f64> = (0..o.n).map(|j| px[j] + atz[j] + o.q[j]).collect();
        let xpx = dot(&x, &px);
        let pcost = 0.5 * xpx + dot(&o.q, &x);
        let dcost = -0.5 * xpx - dot(&o.b, &z);
        let gap_abs = (pcost - dcost).abs();
        let denom = pcost.abs().min(dcost.abs());
        Progress {
            primal: inf_norm(&rp) / (1.0 + inf_norm(&o.b) + inf_norm(&x) + inf_norm(&s)),
            dual: inf_norm(&rd) / (1.0 + inf_norm(&o.q) + inf_norm(&x) + inf_norm(&z)),
            gap_abs,
            gap_rel: if denom > 0.0 { gap_abs / denom } else { f64::INFINITY },
        }
    }

    /// Infeasibility certificates on the raw iterate, in unscaled coordinates.
    fn certificate(&self, it: &Iterate) -> Option<SolveStatus> {
        let o = self.orig;
        let tol = self.settings.infeasibility_tol;
        let x: Vec<f64> = (0..o.n).map(|j| self.d[j] * it.x[j]).collect();
        let z: Vec<f64> = (0..o.m).map(|i| self.e[i] * it.z[i]).collect();
        let s: Vec<f64> = (0..o.m).map(|i| it.s[i] / self.e[i]).collect();
        let bz = dot(&o.b, &z);
        if bz < 0.0 {
            let mut atz = vec![0.0; o.n];
            o.a.gemv_t(1.0, &z, &mut atz);
            if inf_norm(&atz) <= tol * (-bz) {
                return Some(SolveStatus::Infeasible);
            }
        }
        let qx = dot(&o.q, &x);
        if qx < 0.0 {
            let mut px = vec![0.0; o.n];
            o.p.symv_upper(1.0, &x, &mut px);
            let mut axs = s.clone();
            o.a.gemv(1.0, &x, &mut axs);
            if inf_norm(&px) <= tol * (-qx) && inf_norm(&axs) <= tol * (-qx) {
                return Some(SolveStatus::Unbounded);
            }
        }
        None
    }

    /// Newton direction for residual targets `(dx, dz, dτ, dκ, ds)`.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        px: &[f64],
        base: &(Vec<f64>, Vec<f64>),
        dx: &[f64],
        dz: &[f64],
        dtau: f64,
        dkappa: f64,
        ds: &[f64],
    ) -> Step {
        let n = self.f.n;
        let m = self.f.m;
        // λ \ ds
        let mut lds = vec![0.0; m];
        let mut wlds = vec![0.0; m];
        for cone in &self.cones {
            let r = cone.range.clone();
            cone.inv_circ(&self.lambda[r.clone()], &ds[r.clone()], &mut lds[r.clone()]);
            cone.mul_w(&lds[r.clone()], &mut wlds[r]);
        }
        let mut rhs = vec![0.0; n + m];
        for j in 0..n {
            rhs[j] = -dx[j];
        }
        for i in 0..m {
            rhs[n + i] = -dz[i] + wlds[i];
        }
        let mut sol = vec![0.0; n + m];
        self.kkt.solve(&rhs, &mut sol);
        let (x2, z2) = base;
        let tau = it.tau;
        let xpx = dot(&it.x, px);
        let c1: Vec<f64> = (0..n).map(|j| self.f.q[j] + 2.0 * px[j] / tau).collect();
        let num = -dtau + dkappa / tau - dot(&c1, &sol[..n]) - dot(&self.f.b, &sol[n..]);
        let den = dot(&c1, x2) + dot(&self.f.b, z2) - xpx / (tau * tau) - it.kappa / tau;
        let dtau_step = num / den;
        let x: Vec<f64> = (0..n).map(|j| sol[j] + dtau_step * x2[j]).collect();
        let z: Vec<f64> = (0..m).map(|i| sol[n + i] + dtau_step * z2[i]).collect();
        // Δs = −W(λ\ds + WΔz)
        let mut s = vec![0.0; m];
        let mut tmp = vec![0.0; m];
        for cone in &self.cones {
            let r = cone.range.clone();
            cone.mul_w(&z[r.clone()], &mut tmp[r.clone()]);
            for i in r.clone() {
                tmp[i] += lds[i];
            }
            cone.mul_w(&tmp[r.clone()], &mut s[r.clone()]);
            for i in r {
                s[i] = -s[i];
            }
        }
        let kappa = -(dkappa + it.kappa * dtau_step) / tau;
        Step { x, z, s, tau: dtau_step, kappa }
    }

    fn max_step(&self, it: &Iterate, st: &Step, cap: f64) -> f64 {
        let mut a = cap;
        if st.tau < 0.0 {
            a = a.min(-it.tau / st.tau);
        }
        if st.kappa < 0.0 {
            a = a.min(-it.kappa / st.kappa);
        }
        for cone in &self.cones {
            let r = cone.range.clone();
            a = cone.step_length(&it.s[r.clone()], &st.s[r.clone()], a);
            a = cone.step_length(&it.z[r.clone()], &st.z[r], a);
        }
        a.max(0.0)
    }
}

/// Solves `prog`. Invalid programs are rejected; numerical trouble is
/// reported through [`SolveStatus::NumericalFailure`].
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<Solution, ConicError> {
    prog.validate()?;
    let orig = compile(prog);
    let mut scaled = compile(prog);
    let (d, e) = if settings.equilibrate {
        equilibrate(&mut scaled)
    } else {
        (vec![1.0; scaled.n], vec![1.0; scaled.m])
    };
    let n = scaled.n;
    let m = scaled.m;
    let cones = scaled.cones.clone();
    let kkt = Kkt::new(&scaled);
    let mut eng = Engine {
        f: &scaled,
        orig: &orig,
        d,
        e,
        cones,
        kkt,
        lambda: vec![0.0; m],
        settings,
    };
    let nu = eng.degree();
    let mut it = eng.initial_point();
    let mut diag = Diagnostics::default();
    let finish = |eng: &Engine, it: &Iterate, status: SolveStatus, diag: Diagnostics| -> Solution {
        let x: Vec<f64> = (0..n).map(|j| eng.d[j] * it.x[j] / it.tau).collect();
        let objective = match status {
            SolveStatus::Optimal | SolveStatus::NumericalFailure => prog.objective_value(&x),
            SolveStatus::Infeasible => match prog.sense {
                Sense::Minimize => f64::INFINITY,
                Sense::Maximize => f64::NEG_INFINITY,
            },
            SolveStatus::Unbounded => match prog.sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
        };
        Solution { status, x, objective, diagnostics: diag }
    };

    let mut stalls = 0;
    for iter in 0..=settings.max_iter {
        diag.iterations = iter;
        if !(it.tau.is_finite() && it.kappa.is_finite())
            || it.x.iter().chain(&it.z).chain(&it.s).any(|v| !v.is_finite())
        {
            diag.message = Some("iterate became non-finite".into());
            return Ok(finish(&eng, &it, SolveStatus::NumericalFailure, diag));
        }
        let prog_now = eng.progress(&it);
        diag.primal_residual = prog_now.primal;
        diag.dual_residual = prog_now.dual;
        diag.gap = prog_now.gap_abs;
        if prog_now.primal <= settings.feasibility_tol
            && prog_now.dual <= settings.feasibility_tol
            && (prog_now.gap_abs <= settings.gap_abs_tol || prog_now.gap_rel <= settings.gap_rel_tol)
        {
            return Ok(finish(&eng, &it, SolveStatus::Optimal, diag));
        }
        if it.kappa > it.tau {
            if let Some(status) = eng.certificate(&it) {
                return Ok(finish(&eng, &it, status, diag));
            }
        }
        if iter == settings.max_iter {
            break;
        }

        eng.update_scaling(&it);
        eng.kkt.set_hessian(&eng.cones, false);
        diag.regularized_pivots = eng.kkt.factor();

        let f = eng.f;
        let mut px = vec![0.0; n];
        f.p.symv_upper(1.0, &it.x, &mut px);
        let mut rx = px.clone();
        f.a.gemv_t(1.0, &it.z, &mut rx);
        for j in 0..n {
            rx[j] += f.q[j] * it.tau;
        }
        let mut rz = it.s.clone();
        f.a.gemv(1.0, &it.x, &mut rz);
        for i in 0..m {
            rz[i] -= f.b[i] * it.tau;
        }
        let xpx = dot(&it.x, &px);
        let rtau = dot(&f.q, &it.x) + dot(&f.b, &it.z) + xpx / it.tau + it.kappa;

        let mut rhs = vec![0.0; n + m];
        for j in 0..n {
            rhs[j] = -f.q[j];
        }
        rhs[n..].copy_from_slice(&f.b);
        let mut sol = vec![0.0; n + m];
        eng.kkt.solve(&rhs, &mut sol);
        let base = (sol[..n].to_vec(), sol[n..].to_vec());

        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (nu + 1.0);

        // predictor
        let mut ds = vec![0.0; m];
        for cone in &eng.cones {
            let r = cone.range.clone();
            cone.circ(&eng.lambda[r.clone()], &eng.lambda[r.clone()], &mut ds[r]);
        }
        let aff = eng.direction(&it, &px, &base, &rx, &rz, rtau, it.tau * it.kappa, &ds);
        let alpha_aff = eng.max_step(&it, &aff, 1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let mut ws = vec![0.0; m];
        let mut wz = vec![0.0; m];
        let mut corr = vec![0.0; m];
        for cone in &eng.cones {
            let r = cone.range.clone();
            cone.mul_winv(&aff.s[r.clone()], &mut ws[r.clone()]);
            cone.mul_w(&aff.z[r.clone()], &mut wz[r.clone()]);
            cone.circ(&ws[r.clone()], &wz[r.clone()], &mut corr[r.clone()]);
            for i in r.clone() {
                ds[i] += corr[i];
            }
            let mut shift = vec![0.0; r.len()];
            cone.add_identity(&mut shift, -sigma * mu);
            for (k, i) in r.enumerate() {
                ds[i] += shift[k];
            }
        }
        let scale = 1.0 - sigma;
        let dx: Vec<f64> = rx.iter().map(|v| v * scale).collect();
        let dz: Vec<f64> = rz.iter().map(|v| v * scale).collect();
        let dkappa = it.tau * it.kappa + aff.tau * aff.kappa - sigma * mu;
        let step = eng.direction(&it, &px, &base, &dx, &dz, rtau * scale, dkappa, &ds);
        let alpha_max = eng.max_step(&it, &step, f64::INFINITY);
        let alpha = (settings.step_fraction * alpha_max).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                if let Some(status) = eng.certificate(&it) {
                    return Ok(finish(&eng, &it, status, diag));
                }
                diag.message = Some(format!("step length collapsed ({alpha:e})"));
                return Ok(finish(&eng, &it, SolveStatus::NumericalFailure, diag));
            }
        } else {
            stalls = 0;
        }
        for j in 0..n {
            it.x[j] += alpha * step.x[j];
        }
        for i in 0..m {
            it.z[i] += alpha * step.z[i];
            it.s[i] += alpha * step.s[i];
        }
        it.tau += alpha * step.tau;
        it.kappa += alpha * step.kappa;
    }
    diag.message = Some(format!("iteration limit {} reached", settings.max_iter));
    Ok(finish(&eng, &it, SolveStatus::NumericalFailure, diag))
}
