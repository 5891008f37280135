//! Sparse LU factorization with Markowitz pivot selection and threshold
//! partial pivoting.
//!
//! The factorization is right-looking: at each step the pivot row is
//! subtracted from every other active row with a nonzero in the pivot column.
//! `L` is kept as the sequence of those row operations and `U` as the pivot
//! rows in elimination order, so `B x = b` and `B^T y = c` are solved without
//! ever forming permutation matrices.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

const THRESHOLD: f64 = 0.1;
const SEARCH_LINES: usize = 4;

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    // Row operations: for step k, rows l_idx[l_start[k]..] -= l_val * row l_pivot[k].
    l_start: Vec<usize>,
    l_pivot: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    piv_val: Vec<f64>,
    u_start: Vec<usize>,
    u_col: Vec<usize>,
    u_val: Vec<f64>,
}

struct Active {
    n: usize,
    // Short rows as (column, value) lists; long rows switch to `dense`.
    rows: Vec<Vec<(usize, f64)>>,
    dense: Vec<Option<Vec<f64>>>,
    row_len: Vec<usize>,
    col_pat: Vec<Vec<usize>>,
    row_set: BTreeSet<(usize, usize)>,
    col_set: BTreeSet<(usize, usize)>,
}

impl Active {
    fn value(&self, i: usize, j: usize) -> f64 {
        match &self.dense[i] {
            Some(d) => d[j],
            None => self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1),
        }
    }

    fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.dense[i] {
            Some(d) => d.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, &v)| (j, v)).collect(),
            None => self.rows[i].clone(),
        }
    }

    fn col_max(&self, j: usize) -> f64 {
        self.col_pat[j].iter().map(|&i| self.value(i, j).abs()).fold(0.0, f64::max)
    }

    fn dense_threshold(&self) -> usize {
        64.max(self.n / 16)
    }

    fn choose_pivot(&self, abs_tol: f64) -> Result<(usize, usize)> {
        let singular = || Error::Numerical("singular matrix in sparse LU".into());
        let &(ccount, j) = self.col_set.first().ok_or_else(singular)?;
        if ccount == 0 {
            return Err(singular());
        }
        if ccount == 1 {
            let i = self.col_pat[j][0];
            if self.value(i, j).abs() > abs_tol {
                return Ok((i, j));
            }
        }
        let &(rcount, i) = self.row_set.first().ok_or_else(singular)?;
        if rcount == 0 {
            return Err(singular());
        }
        if rcount == 1 {
            let (j, a) = self.row_entries(i)[0];
            if a.abs() > abs_tol && a.abs() >= THRESHOLD * self.col_max(j) {
                return Ok((i, j));
            }
        }

        // (cost, -|a|, i, j)
        let mut best: Option<(usize, f64, usize, usize)> = None;
        let mut consider = |cost: usize, a: f64, i: usize, j: usize| {
            let better = match best {
                None => true,
                Some((c, na, bi, bj)) => (cost, -a.abs(), i, j) < (c, na, bi, bj),
            };
            if better {
                best = Some((cost, -a.abs(), i, j));
            }
        };
        for &(c, j) in self.col_set.iter().take(SEARCH_LINES) {
            let cmax = self.col_max(j);
            for &i in &self.col_pat[j] {
                let a = self.value(i, j);
                if a.abs() > abs_tol && a.abs() >= THRESHOLD * cmax {
                    consider((self.row_len[i] - 1) * (c - 1), a, i, j);
                }
            }
        }
        for &(r, i) in self.row_set.iter().take(SEARCH_LINES) {
            for (j, a) in self.row_entries(i) {
                if a.abs() > abs_tol && a.abs() >= THRESHOLD * self.col_max(j) {
                    consider((r - 1) * (self.col_pat[j].len() - 1), a, i, j);
                }
            }
        }
        best.map(|(_, _, i, j)| (i, j)).ok_or_else(singular)
    }

    /// Row `i` -= `l` * pivot row (pivot column `q` already removed from `i`).
    fn eliminate(&mut self, i: usize, l: f64, prow: &[(usize, f64)], q: usize, pos: &mut [usize]) {
        if let Some(d) = self.dense[i].as_mut() {
            let mut len = self.row_len[i];
            for &(j, u) in prow {
                if j == q {
                    continue;
                }
                let old = d[j];
                let new = old - l * u;
                d[j] = new;
                if old == 0.0 && new != 0.0 {
                    self.col_pat[j].push(i);
                    len += 1;
                } else if old != 0.0 && new == 0.0 {
                    self.col_pat[j].retain(|&r| r != i);
                    len -= 1;
                }
            }
            self.row_len[i] = len;
            return;
        }
        let threshold = self.dense_threshold();
        let row = &mut self.rows[i];
        for (k, e) in row.iter().enumerate() {
            pos[e.0] = k;
        }
        for &(j, u) in prow {
            if j == q {
                continue;
            }
            if pos[j] != usize::MAX {
                row[pos[j]].1 -= l * u;
            } else {
                pos[j] = row.len();
                row.push((j, -l * u));
                self.col_pat[j].push(i);
            }
        }
        for e in row.iter() {
            pos[e.0] = usize::MAX;
        }
        let before = row.len();
        row.retain(|e| e.1 != 0.0);
        if row.len() != before {
            let kept: Vec<usize> = row.iter().map(|e| e.0).collect();
            for &(j, _) in prow {
                if j != q && !kept.contains(&j) {
                    self.col_pat[j].retain(|&r| r != i);
                }
            }
        }
        self.row_len[i] = row.len();
        if row.len() > threshold {
            let mut d = vec![0.0; self.n];
            for &(j, v) in row.iter() {
                d[j] = v;
            }
            row.clear();
            self.dense[i] = Some(d);
        }
    }

    fn remove_entry(&mut self, i: usize, q: usize) -> f64 {
        self.row_len[i] -= 1;
        match self.dense[i].as_mut() {
            Some(d) => std::mem::replace(&mut d[q], 0.0),
            None => {
                let row = &mut self.rows[i];
                let qpos = row.iter().position(|e| e.0 == q).expect("pattern and row agree");
                row.swap_remove(qpos).1
            }
        }
    }
}

impl SparseLu {
    /// Factors the square matrix whose `j`-th column is `cols[j]` (row, value pairs).
    pub fn factor(cols: &[Vec<(usize, f64)>], abs_tol: f64) -> Result<Self> {
        let n = cols.len();
        let mut act = Active {
            n,
            rows: vec![Vec::new(); n],
            dense: vec![None; n],
            row_len: vec![0; n],
            col_pat: vec![Vec::new(); n],
            row_set: BTreeSet::new(),
            col_set: BTreeSet::new(),
        };
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                if i >= n {
                    return Err(Error::Numerical(format!("row {i} out of range in LU input")));
                }
                if v != 0.0 {
                    act.rows[i].push((j, v));
                    act.col_pat[j].push(i);
                }
            }
        }
        for i in 0..n {
            act.row_len[i] = act.rows[i].len();
            if act.row_len[i] > act.dense_threshold() {
                let mut d = vec![0.0; n];
                for &(j, v) in &act.rows[i] {
                    d[j] += v;
                }
                act.rows[i].clear();
                act.dense[i] = Some(d);
            }
            act.row_set.insert((act.row_len[i], i));
            act.col_set.insert((act.col_pat[i].len(), i));
        }

        let mut lu = SparseLu {
            n,
            l_start: vec![0],
            l_pivot: Vec::with_capacity(n),
            l_idx: Vec::new(),
            l_val: Vec::new(),
            piv_row: Vec::with_capacity(n),
            piv_col: Vec::with_capacity(n),
            piv_val: Vec::with_capacity(n),
            u_start: vec![0],
            u_col: Vec::new(),
            u_val: Vec::new(),
        };
        let mut pos = vec![usize::MAX; n];

        for _ in 0..n {
            let (p, q) = act.choose_pivot(abs_tol)?;
            let pivot = act.value(p, q);
            let prow = act.row_entries(p);
            act.rows[p] = Vec::new();
            act.dense[p] = None;

            act.row_set.remove(&(act.row_len[p], p));
            act.row_len[p] = 0;
            act.col_set.remove(&(act.col_pat[q].len(), q));
            // Columns touched by the pivot row change count; re-keyed below.
            for &(j, _) in &prow {
                if j != q {
                    act.col_set.remove(&(act.col_pat[j].len(), j));
                    act.col_pat[j].retain(|&i| i != p);
                }
            }

            lu.piv_row.push(p);
            lu.piv_col.push(q);
            lu.piv_val.push(pivot);
            for &(j, v) in &prow {
                if j != q {
                    lu.u_col.push(j);
                    lu.u_val.push(v);
                }
            }
            lu.u_start.push(lu.u_col.len());

            let targets: Vec<usize> = act.col_pat[q].iter().copied().filter(|&i| i != p).collect();
            lu.l_pivot.push(p);
            for i in targets {
                act.row_set.remove(&(act.row_len[i], i));
                let l = act.remove_entry(i, q) / pivot;
                act.eliminate(i, l, &prow, q, &mut pos);
                act.row_set.insert((act.row_len[i], i));
                lu.l_idx.push(i);
                lu.l_val.push(l);
            }
            lu.l_start.push(lu.l_idx.len());
            act.col_pat[q].clear();

            for &(j, _) in &prow {
                if j != q {
                    act.col_set.insert((act.col_pat[j].len(), j));
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entries stored in both factors.
    pub fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_col.len() + self.n
    }

    /// Solves `B x = b`; `b` is indexed by row, the result by column.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = rhs.to_vec();
        for k in 0..self.l_pivot.len() {
            let bp = b[self.l_pivot[k]];
            if bp != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[t]] -= self.l_val[t] * bp;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for k in (0..self.n).rev() {
            let mut s = b[self.piv_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[t] * x[self.u_col[t]];
            }
            x[self.piv_col[k]] = s / self.piv_val[k];
        }
        x
    }

    /// Solves `B^T y = c`; `c` is indexed by column, the result by row.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let mut acc = rhs.to_vec();
        let mut z = vec![0.0; self.n];
        for k in 0..self.n {
            let zk = acc[self.piv_col[k]] / self.piv_val[k];
            z[self.piv_row[k]] = zk;
            if zk != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    acc[self.u_col[t]] -= self.u_val[t] * zk;
                }
            }
        }
        for k in (0..self.l_pivot.len()).rev() {
            let mut s = 0.0;
            for t in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[t] * z[self.l_idx[t]];
            }
            z[self.l_pivot[k]] -= s;
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let n = a.len();
        (0..n)
            .map(|j| (0..n).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])).collect())
            .collect()
    }

    fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn mat_t_vec(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = a.len();
        (0..n).map(|j| (0..n).map(|i| a[i][j] * y[i]).sum()).collect()
    }

    #[test]
    fn small_system() {
        let a = vec![vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 3.0], vec![4.0, 0.0, 1.0]];
        let lu = SparseLu::factor(&dense_cols(&a), 1e-12).unwrap();
        let b = [2.0, 7.0, 5.0];
        let x = lu.solve(&b);
        for (got, want) in mat_vec(&a, &x).iter().zip(&b) {
            assert!((got - want).abs() < 1e-12);
        }
        let y = lu.solve_transpose(&b);
        for (got, want) in mat_t_vec(&a, &y).iter().zip(&b) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(SparseLu::factor(&dense_cols(&a), 1e-12).is_err());
        let z = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        assert!(SparseLu::factor(&dense_cols(&z), 1e-12).is_err());
    }

    proptest! {
        #[test]
        fn random_sparse_systems(n in 1usize..25, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Diagonally dominant sparse matrix under a random column permutation.
            let mut a = vec![vec![0.0; n]; n];
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            for i in 0..n {
                for j in 0..n {
                    if rng.random_bool(0.2) {
                        a[i][j] = rng.random_range(-1.0..1.0);
                    }
                }
            }
            for i in 0..n {
                a[i][perm[i]] = n as f64 + 1.0;
            }
            let lu = SparseLu::factor(&dense_cols(&a), 1e-12).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = lu.solve(&b);
            for (got, want) in mat_vec(&a, &x).iter().zip(&b) {
                prop_assert!((got - want).abs() < 1e-9);
            }
            let y = lu.solve_transpose(&b);
            for (got, want) in mat_t_vec(&a, &y).iter().zip(&b) {
                prop_assert!((got - want).abs() < 1e-9);
            }
        }
    }
}
