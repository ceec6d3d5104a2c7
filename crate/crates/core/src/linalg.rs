//! Compressed sparse row storage, reverse Cuthill–McKee ordering and a
//! sparse LDLᵀ factorization for symmetric (quasi-definite) systems.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given structure. Column lists are sorted and deduplicated.
    pub fn from_pattern(nrows: usize, ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < ncols));
            indices.extend(r);
            indptr.push(indices.len());
        }
        let nnz = indices.len();
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data: vec![0.0; nnz],
        }
    }

    /// Sums duplicate entries in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::from_pattern(nrows, ncols, rows);
        for &(r, c, v) in triplets {
            let pos = m.find(r, c).expect("entry in pattern");
            m.data[pos] += v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[range.clone()], &self.data[range])
    }

    /// Storage position of entry `(r, c)` if it is structurally present.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.indptr[r];
        let cols = &self.indices[start..self.indptr[r + 1]];
        cols.binary_search(&c).ok().map(|k| start + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.find(r, c).map_or(0.0, |p| self.data[p])
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `y = Aᵀ x`.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[p];
                let q = next[c];
                indices[q] = r;
                data[q] = self.data[p];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] += v;
            }
        }
        d
    }

    /// Largest `|A_ij − A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// Reverse Cuthill–McKee ordering of the graph on indices `0..n_graph`;
/// the remaining indices are appended unchanged.
pub fn rcm_ordering(a: &CsrMatrix, n_graph: usize) -> Vec<usize> {
    let n = a.nrows();
    let neighbors = |v: usize| a.row(v).0.iter().copied().filter(move |&c| c != v && c < n_graph);
    let degree: Vec<usize> = (0..n_graph).map(|v| neighbors(v).count()).collect();
    let mut visited = vec![false; n_graph];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // (last node of the deepest level with minimal degree, depth)
        let mut seen = visited.to_vec();
        let mut frontier = vec![start];
        seen[start] = true;
        let mut depth = 0;
        loop {
            let mut next = Vec::new();
            for &v in &frontier {
                for w in neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                let best = *frontier
                    .iter()
                    .min_by_key(|&&v| (degree[v], v))
                    .expect("non-empty level");
                return (best, depth);
            }
            frontier = next;
            depth += 1;
        }
    };
    for seed in 0..n_graph {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node of this component
        let mut start = seed;
        let (mut cand, mut depth) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let (c2, d2) = bfs_levels(cand, &visited);
            if d2 <= depth {
                break;
            }
            start = cand;
            cand = c2;
            depth = d2;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = neighbors(v).filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order.extend(n_graph..n);
    order
}

/// Elimination tree and column structure of `L` for a fixed ordering.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
    /// Pattern fingerprint of the analyzed matrix.
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl LdlSymbolic {
    /// `perm[k]` is the original index eliminated at step `k`.
    pub fn analyze(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::LinearAlgebra(
                "LDL needs a square matrix and a full permutation".into(),
            ));
        }
        let mut pinv = vec![NONE; n];
        for (k, &p) in perm.iter().enumerate() {
            if p >= n || pinv[p] != NONE {
                return Err(Error::LinearAlgebra("invalid permutation".into()));
            }
            pinv[p] = k;
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let (cols, _) = a.row(perm[k]);
            for &c in cols {
                let mut i = pinv[c];
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
        Ok(Self {
            n,
            perm,
            pinv,
            parent,
            lp,
            indptr: a.indptr().to_vec(),
            indices: a.indices().to_vec(),
        })
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization of a matrix with the analyzed pattern.
    pub fn factor(&self, a: &CsrMatrix) -> Result<LdlFactor> {
        if a.indptr() != self.indptr.as_slice() || a.indices() != self.indices.as_slice() {
            return Err(Error::Contract(
                "matrix pattern differs from the analyzed one".into(),
            ));
        }
        let n = self.n;
        let nnz = self.factor_nnz();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = a.row(self.perm[k]);
            for (&c, &v) in cols.iter().zip(vals) {
                let mut i = self.pinv[c];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = self.parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = self.lp[i] + lnz[i];
                for p in self.lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(Error::LinearAlgebra(format!(
                    "zero or non-finite pivot at elimination step {k} (row {})",
                    self.perm[k]
                )));
            }
        }
        Ok(LdlFactor {
            li,
            lx,
            d,
            lp: self.lp.clone(),
            perm: self.perm.clone(),
        })
    }
}

/// Numeric `P A Pᵀ = L D Lᵀ` factors.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    perm: Vec<usize>,
}

impl LdlFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }

    /// Number of negative pivots.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
