//! Compressed-column matrices and a sparse LDLᵀ factorization for
//! quasi-definite systems.

use std::collections::BTreeSet;

const NONE: usize = usize::MAX;

/// Column-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Csc {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl Csc {
    /// Builds from triplets, summing duplicates. Rows are sorted within columns.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; ncols + 1];
        for &(_, c, _) in trip {
            count[c + 1] += 1;
        }
        for c in 0..ncols {
            count[c + 1] += count[c];
        }
        let mut next = count.clone();
        let mut rows = vec![0usize; trip.len()];
        let mut vals = vec![0.0; trip.len()];
        for &(r, c, v) in trip {
            debug_assert!(r < nrows && c < ncols);
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowval = Vec::with_capacity(trip.len());
        let mut nzval = Vec::with_capacity(trip.len());
        colptr.push(0);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            entries.clear();
            entries.extend((count[c]..count[c + 1]).map(|k| (rows[k], vals[k])));
            entries.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < entries.len() {
                let r = entries[k].0;
                let mut v = 0.0;
                while k < entries.len() && entries[k].0 == r {
                    v += entries[k].1;
                    k += 1;
                }
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        Self { nrows, ncols, colptr, rowval, nzval }
    }

    /// `y += alpha * A x`
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowval[k]] += self.nzval[k] * xc;
            }
        }
    }

    /// `y += alpha * Aᵀ x`
    pub fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for k in self.colptr[c]..self.colptr[c + 1] {
                acc += self.nzval[k] * x[self.rowval[k]];
            }
            y[c] += alpha * acc;
        }
    }

    /// `y += alpha * S x` where `self` holds the upper triangle of symmetric `S`.
    pub fn symv_upper(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowval[k];
                let v = alpha * self.nzval[k];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
    }
}

/// Greedy minimum-degree ordering of a symmetric pattern.
///
/// `edges` lists off-diagonal pairs. Ties go to the smaller index, so the
/// result is deterministic. Returns `perm` with `perm[new] = old`.
pub(crate) fn minimum_degree(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in edges {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (adj[i].len(), i)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, node)) = queue.pop_first() {
        perm.push(node);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[node]).into_iter().collect();
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&node);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &v in &nbrs[a + 1..] {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
        for &u in &nbrs {
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

/// Symbolic structure of `L` for a fixed upper-triangular pattern.
#[derive(Debug, Clone)]
pub(crate) struct LdlSymbolic {
    n: usize,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

impl LdlSymbolic {
    pub fn analyze(upper: &Csc) -> Self {
        let n = upper.ncols;
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for p in upper.colptr[k]..upper.colptr[k + 1] {
                let mut i = upper.rowval[p];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        Self { n, parent, lp }
    }

    pub fn nnz(&self) -> usize {
        self.lp[self.n]
    }
}

/// Numeric `L D Lᵀ` factors.
#[derive(Debug, Clone)]
pub(crate) struct LdlFactor {
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    /// Pivots that were replaced by the dynamic regularization.
    pub bumped: usize,
}

/// Dynamic regularization applied to pivots with the wrong sign or tiny size.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PivotGuard {
    pub eps: f64,
    pub delta: f64,
}

impl LdlFactor {
    /// Up-looking factorization of the upper triangle `upper`.
    ///
    /// `signs[k]` is the expected sign of pivot `k`.
    pub fn factor(sym: &LdlSymbolic, upper: &Csc, signs: &[f64], guard: PivotGuard) -> Self {
        let n = sym.n;
        let nnz = sym.nnz();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut bumped = 0;
        for k in 0..n {
            y[k] = 0.0;
            let mut top = n;
            flag[k] = k;
            for p in upper.colptr[k]..upper.colptr[k + 1] {
                let mut i = upper.rowval[p];
                if i > k {
                    continue;
                }
                y[i] += upper.nzval[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = sym.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = sym.lp[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                dk -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
            }
            if !(dk * signs[k] > guard.eps) {
                dk = signs[k] * guard.delta;
                bumped += 1;
            }
            d[k] = dk;
        }
        Self { lp: sym.lp.clone(), li, lx, d, bumped }
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc;
        }
    }
}
