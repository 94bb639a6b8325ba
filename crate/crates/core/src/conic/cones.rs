//! Cone kinds, Nesterov-Todd scalings and Jordan-algebra helpers.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ConeKind {
    Zero,
    Nonneg,
    Soc,
}

/// One cone block and its current scaling.
#[derive(Debug, Clone)]
pub(crate) struct Cone {
    pub kind: ConeKind,
    pub range: Range<usize>,
    /// Orthant: `sqrt(s/z)` per entry. SOC: the normalized point `w̄`.
    w: Vec<f64>,
    /// SOC scale `η`.
    eta: f64,
}

impl Cone {
    pub fn new(kind: ConeKind, range: Range<usize>) -> Self {
        let dim = range.len();
        let w = match kind {
            ConeKind::Zero => Vec::new(),
            ConeKind::Nonneg => vec![1.0; dim],
            ConeKind::Soc => {
                let mut w = vec![0.0; dim];
                w[0] = 1.0;
                w
            }
        };
        Self { kind, range, w, eta: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.range.len()
    }

    /// Contribution to the barrier degree.
    pub fn degree(&self) -> usize {
        match self.kind {
            ConeKind::Zero => 0,
            ConeKind::Nonneg => self.dim(),
            ConeKind::Soc => 1,
        }
    }

    /// Smallest eigenvalue of `u` with respect to the cone.
    pub fn min_eig(&self, u: &[f64]) -> f64 {
        match self.kind {
            ConeKind::Zero => f64::INFINITY,
            ConeKind::Nonneg => u.iter().copied().fold(f64::INFINITY, f64::min),
            ConeKind::Soc => u[0] - norm(&u[1..]),
        }
    }

    /// Adds `alpha * e` to `u`.
    pub fn add_identity(&self, u: &mut [f64], alpha: f64) {
        match self.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => u.iter_mut().for_each(|v| *v += alpha),
            ConeKind::Soc => u[0] += alpha,
        }
    }

    /// Largest `α ≤ cap` keeping `u + α d` in the cone.
    pub fn step_length(&self, u: &[f64], d: &[f64], cap: f64) -> f64 {
        match self.kind {
            ConeKind::Zero => cap,
            ConeKind::Nonneg => {
                let mut a = cap;
                for (ui, di) in u.iter().zip(d) {
                    if *di < 0.0 {
                        a = a.min(-ui / di);
                    }
                }
                a
            }
            ConeKind::Soc => soc_step(u, d, cap),
        }
    }

    /// Recomputes the NT scaling from strictly interior `s`, `z`.
    pub fn update_scaling(&mut self, s: &[f64], z: &[f64]) {
        match self.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => {
                for ((w, si), zi) in self.w.iter_mut().zip(s).zip(z) {
                    *w = (si / zi).sqrt();
                }
            }
            ConeKind::Soc => {
                let sdet = soc_det(s).max(f64::MIN_POSITIVE).sqrt();
                let zdet = soc_det(z).max(f64::MIN_POSITIVE).sqrt();
                let dim = s.len();
                let sb: Vec<f64> = s.iter().map(|v| v / sdet).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / zdet).collect();
                let dot: f64 = sb.iter().zip(&zb).map(|(a, b)| a * b).sum();
                let gamma = ((1.0 + dot) / 2.0).max(0.0).sqrt();
                self.w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                for i in 1..dim {
                    self.w[i] = (sb[i] - zb[i]) / (2.0 * gamma);
                }
                // renormalize so that w0² − ‖w1‖² = 1 exactly
                let w1 = norm(&self.w[1..]);
                self.w[0] = (1.0 + w1 * w1).sqrt();
                self.eta = (sdet / zdet).sqrt();
            }
        }
    }

    /// `out = W v`.
    pub fn mul_w(&self, v: &[f64], out: &mut [f64]) {
        self.apply_w(v, out, false);
    }

    /// `out = W⁻¹ v`.
    pub fn mul_winv(&self, v: &[f64], out: &mut [f64]) {
        self.apply_w(v, out, true);
    }

    fn apply_w(&self, v: &[f64], out: &mut [f64], inverse: bool) {
        match self.kind {
            ConeKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ConeKind::Nonneg => {
                for ((o, vi), wi) in out.iter_mut().zip(v).zip(&self.w) {
                    *o = if inverse { vi / wi } else { vi * wi };
                }
            }
            ConeKind::Soc => {
                let w0 = self.w[0];
                let w1 = &self.w[1..];
                let sign = if inverse { -1.0 } else { 1.0 };
                let scale = if inverse { 1.0 / self.eta } else { self.eta };
                let w1v1: f64 = w1.iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
                out[0] = scale * (w0 * v[0] + sign * w1v1);
                let coef = sign * v[0] + w1v1 / (1.0 + w0);
                for i in 1..v.len() {
                    out[i] = scale * (v[i] + coef * w1[i - 1]);
                }
            }
        }
    }

    /// Upper-triangle entries `(i, j, H_ij)` of `H = W²`, block-local indices.
    pub fn hessian_upper(&self, out: &mut Vec<(usize, usize, f64)>) {
        match self.kind {
            ConeKind::Zero => {
                for i in 0..self.dim() {
                    out.push((i, i, 0.0));
                }
            }
            ConeKind::Nonneg => {
                for (i, w) in self.w.iter().enumerate() {
                    out.push((i, i, w * w));
                }
            }
            ConeKind::Soc => {
                // W² = η² (2 w̄ w̄ᵀ − J)
                let e2 = self.eta * self.eta;
                for j in 0..self.dim() {
                    for i in 0..=j {
                        let mut v = 2.0 * self.w[i] * self.w[j];
                        if i == j {
                            v += if i == 0 { -1.0 } else { 1.0 };
                        }
                        out.push((i, j, e2 * v));
                    }
                }
            }
        }
    }

    /// Jordan product `u ∘ v`.
    pub fn circ(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        match self.kind {
            ConeKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ConeKind::Nonneg => {
                for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                    *o = a * b;
                }
            }
            ConeKind::Soc => {
                out[0] = u.iter().zip(v).map(|(a, b)| a * b).sum();
                for i in 1..u.len() {
                    out[i] = u[0] * v[i] + v[0] * u[i];
                }
            }
        }
    }

    /// Solves `λ ∘ x = d` for `x`.
    pub fn inv_circ(&self, lambda: &[f64], d: &[f64], out: &mut [f64]) {
        match self.kind {
            ConeKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ConeKind::Nonneg => {
                for ((o, l), di) in out.iter_mut().zip(lambda).zip(d) {
                    *o = di / l;
                }
            }
            ConeKind::Soc => {
                let l0 = lambda[0];
                let l1d1: f64 = lambda[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
                let det = soc_det(lambda);
                let x0 = (l0 * d[0] - l1d1) / det;
                out[0] = x0;
                for i in 1..d.len() {
                    out[i] = (d[i] - x0 * lambda[i]) / l0;
                }
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn soc_det(u: &[f64]) -> f64 {
    let t = norm(&u[1..]);
    (u[0] - t) * (u[0] + t)
}

fn soc_step(u: &[f64], d: &[f64], cap: f64) -> f64 {
    // (u0 + α d0)² − ‖u1 + α d1‖² ≥ 0 with u0 + α d0 ≥ 0
    let a = soc_det(d);
    let b = u[0] * d[0] - u[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>();
    let c = soc_det(u).max(0.0);
    let mut alpha = cap;
    if d[0] < 0.0 {
        alpha = alpha.min(-u[0] / d[0]);
    }
    let disc = b * b - a * c;
    if a == 0.0 {
        if b < 0.0 {
            alpha = alpha.min(-c / (2.0 * b));
        }
        return alpha.max(0.0);
    }
    if disc < 0.0 {
        return alpha.max(0.0);
    }
    let q = -(b + b.signum() * disc.sqrt());
    for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if root > 0.0 {
            alpha = alpha.min(root);
        }
    }
    alpha.max(0.0)
}
