//! Compressed sparse row storage with a fixed pattern, plus a profile
//! (envelope) LU factorization for structurally symmetric systems.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Square CSR matrix whose sparsity pattern is fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Pattern holding every pair of dofs that share an entry of `groups`.
    pub fn from_groups<'a>(n: usize, groups: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for g in groups {
            for &i in g {
                rows[i].extend_from_slice(g);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Storage position of `(i, j)`, if it belongs to the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                row[j] = a;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry magnitude.
    pub fn asymmetry(&self) -> f64 {
        let mut max_entry: f64 = 0.0;
        let mut max_diff: f64 = 0.0;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                max_entry = max_entry.max(a.abs());
                if j > i {
                    max_diff = max_diff.max((a - self.get(j, i)).abs());
                }
            }
        }
        if max_entry == 0.0 {
            0.0
        } else {
            max_diff / max_entry
        }
    }

    /// Adjacency lists of the pattern graph, without self loops.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.row(i).0.iter().copied().filter(|&j| j != i).collect())
            .collect()
    }
}

/// Reverse Cuthill-McKee ordering; returns `order[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |i: usize| adj[i].len();
    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree(i))
            .unwrap();
        let start = peripheral_node(adj, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree(w), w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn peripheral_node(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut current = seed;
    let mut best_ecc = 0;
    for _ in 0..4 {
        let levels = bfs_levels(adj, current);
        let ecc = levels.iter().filter_map(|&l| l).max().unwrap_or(0);
        if ecc <= best_ecc && current != seed {
            break;
        }
        best_ecc = ecc;
        let far = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(ecc))
            .min_by_key(|(i, _)| adj[*i].len())
            .map(|(i, _)| i)
            .unwrap();
        if far == current {
            break;
        }
        current = far;
    }
    current
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let l = level[v].unwrap();
        for &w in &adj[v] {
            if level[w].is_none() {
                level[w] = Some(l + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

/// LU factorization without pivoting over the envelope of a structurally
/// symmetric matrix. For symmetric input this is LDLᵀ with `U = D Lᵀ`.
#[derive(Debug, Clone)]
pub struct ProfileLu {
    n: usize,
    first: Vec<usize>,
    uptr: Vec<usize>,
    lptr: Vec<usize>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    positive_pivots: bool,
}

impl ProfileLu {
    /// Factors the submatrix of `a` selected by `order` (`order[k]` is the
    /// global index of local unknown `k`).
    pub fn factor(a: &CsrMatrix, order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut local = vec![usize::MAX; a.dim()];
        for (k, &g) in order.iter().enumerate() {
            local[g] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (k, &g) in order.iter().enumerate() {
            for &c in a.row(g).0 {
                let l = local[c];
                if l != usize::MAX {
                    let (lo, hi) = if l < k { (l, k) } else { (k, l) };
                    if lo < first[hi] {
                        first[hi] = lo;
                    }
                }
            }
        }
        let mut uptr = Vec::with_capacity(n + 1);
        let mut lptr = Vec::with_capacity(n + 1);
        uptr.push(0);
        lptr.push(0);
        for j in 0..n {
            uptr.push(uptr[j] + j - first[j] + 1);
            lptr.push(lptr[j] + j - first[j]);
        }
        let mut upper = vec![0.0; uptr[n]];
        let mut lower = vec![0.0; lptr[n]];
        let mut diag_scale: f64 = 0.0;
        for (r, &g) in order.iter().enumerate() {
            let (cols, vals) = a.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                let cl = local[c];
                if cl == usize::MAX {
                    continue;
                }
                if cl >= r {
                    upper[uptr[cl] + r - first[cl]] = v;
                    if cl == r {
                        diag_scale = diag_scale.max(v.abs());
                    }
                } else {
                    lower[lptr[r] + cl - first[r]] = v;
                }
            }
        }
        let mut lu = ProfileLu {
            n,
            first,
            uptr,
            lptr,
            upper,
            lower,
            positive_pivots: true,
        };
        lu.decompose(diag_scale)?;
        Ok(lu)
    }

    fn decompose(&mut self, scale: f64) -> Result<()> {
        let tiny = 1e-13 * scale.max(f64::MIN_POSITIVE);
        for j in 0..self.n {
            let fj = self.first[j];
            for i in fj..j {
                let m = self.first[i].max(fj);
                if m < i {
                    let li = &self.lower[self.lptr[i] + m - self.first[i]..self.lptr[i] + i - self.first[i]];
                    let uj = &self.upper[self.uptr[j] + m - fj..self.uptr[j] + i - fj];
                    let s: f64 = li.iter().zip(uj).map(|(a, b)| a * b).sum();
                    self.upper[self.uptr[j] + i - fj] -= s;
                }
            }
            for i in fj..j {
                let m = self.first[i].max(fj);
                let s: f64 = if m < i {
                    let lj = &self.lower[self.lptr[j] + m - fj..self.lptr[j] + i - fj];
                    let ui = &self.upper[self.uptr[i] + m - self.first[i]..self.uptr[i] + i - self.first[i]];
                    lj.iter().zip(ui).map(|(a, b)| a * b).sum()
                } else {
                    0.0
                };
                let pivot = self.upper[self.uptr[i] + i - self.first[i]];
                let slot = &mut self.lower[self.lptr[j] + i - fj];
                *slot = (*slot - s) / pivot;
            }
            let lj = &self.lower[self.lptr[j]..self.lptr[j + 1]];
            let uj = &self.upper[self.uptr[j]..self.uptr[j + 1] - 1];
            let s: f64 = lj.iter().zip(uj).map(|(a, b)| a * b).sum();
            let d = self.upper[self.uptr[j + 1] - 1] - s;
            if !d.is_finite() || d.abs() <= tiny {
                return Err(Error::Singular { pivot: j, value: d });
            }
            if d <= 0.0 {
                self.positive_pivots = false;
            }
            self.upper[self.uptr[j + 1] - 1] = d;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True when every pivot is positive, i.e. a symmetric input is SPD.
    pub fn positive_pivots(&self) -> bool {
        self.positive_pivots
    }

    /// Solves in local (ordered) numbering, in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        for j in 0..self.n {
            let fj = self.first[j];
            let lj = &self.lower[self.lptr[j]..self.lptr[j + 1]];
            let s: f64 = lj.iter().zip(&b[fj..j]).map(|(a, x)| a * x).sum();
            b[j] -= s;
        }
        for j in (0..self.n).rev() {
            let fj = self.first[j];
            let col = &self.upper[self.uptr[j]..self.uptr[j + 1]];
            let xj = b[j] / col[j - fj];
            b[j] = xj;
            for (r, u) in (fj..j).zip(col) {
                b[r] -= u * xj;
            }
        }
    }

    pub fn profile_size(&self) -> usize {
        self.upper.len() + self.lower.len()
    }
}
