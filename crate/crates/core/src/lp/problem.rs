use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CscMatrix {
    nrows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn new(nrows: usize) -> Self {
        CscMatrix {
            nrows,
            col_ptr: vec![0],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a column; duplicate rows are summed and exact zeros dropped.
    pub fn push_column(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        let mut col: Vec<(usize, f64)> = entries.into_iter().collect();
        col.sort_by_key(|e| e.0);
        let start = self.row_idx.len();
        for (row, v) in col {
            if row >= self.nrows {
                return Err(Error::config(format!("row {row} out of range for {} rows", self.nrows)));
            }
            if !v.is_finite() {
                return Err(Error::config(format!("non-finite matrix entry at row {row}")));
            }
            if self.row_idx.len() > start && *self.row_idx.last().unwrap() == row {
                *self.values.last_mut().unwrap() += v;
            } else {
                self.row_idx.push(row);
                self.values.push(v);
            }
        }
        // drop cancelled entries
        let mut w = start;
        for r in start..self.row_idx.len() {
            if self.values[r] != 0.0 {
                self.row_idx[w] = self.row_idx[r];
                self.values[w] = self.values[r];
                w += 1;
            }
        }
        self.row_idx.truncate(w);
        self.values.truncate(w);
        self.col_ptr.push(w);
        Ok(())
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = CscMatrix::new(nrows);
        for j in 0..ncols {
            m.push_column(rows.iter().enumerate().map(|(i, r)| (i, r[j])))?;
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn column_slices(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate().take(self.ncols()) {
            if xj != 0.0 {
                for (i, v) in self.column(j) {
                    y[i] += v * xj;
                }
            }
        }
        y
    }

    /// `a_j . y`.
    pub fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        self.column(j).map(|(i, v)| v * y[i]).sum()
    }
}

/// `min c.x  s.t.  A x = b, x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: CscMatrix,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, constraints: CscMatrix, rhs: Vec<f64>) -> Result<Self> {
        let p = LpProblem {
            objective,
            constraints,
            rhs,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraints.ncols() != self.objective.len() {
            return Err(Error::config(format!(
                "objective has {} entries for {} columns",
                self.objective.len(),
                self.constraints.ncols()
            )));
        }
        if self.constraints.nrows() != self.rhs.len() {
            return Err(Error::config(format!(
                "rhs has {} entries for {} rows",
                self.rhs.len(),
                self.constraints.nrows()
            )));
        }
        if self.objective.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite objective or rhs entry"));
        }
        Ok(())
    }

    /// Plain-text standard form: `lp <rows> <cols> <nnz>`, then `c j value`,
    /// `b i value` and `a i j value` lines. Values use round-trip formatting.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "lp {} {} {}",
            self.num_constraints(),
            self.num_vars(),
            self.constraints.nnz()
        );
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "c {j} {c:e}");
            }
        }
        for (i, b) in self.rhs.iter().enumerate() {
            if *b != 0.0 {
                let _ = writeln!(out, "b {i} {b:e}");
            }
        }
        for j in 0..self.num_vars() {
            for (i, v) in self.constraints.column(j) {
                let _ = writeln!(out, "a {i} {j} {v:e}");
            }
        }
        out
    }

    pub fn from_dump<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty LP dump".into()))??;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("lp") {
            return Err(Error::Parse("LP dump must start with `lp`".into()));
        }
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            *d = parse_field(parts.next())?;
        }
        let [m, n, _nnz] = dims;
        let mut objective = vec![0.0; n];
        let mut rhs = vec![0.0; m];
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for line in lines {
            let line = line?;
            let mut f = line.split_whitespace();
            match f.next() {
                None => continue,
                Some("c") => {
                    let j: usize = parse_field(f.next())?;
                    *objective.get_mut(j).ok_or_else(|| Error::Parse(format!("column {j} out of range")))? = parse_field(f.next())?;
                }
                Some("b") => {
                    let i: usize = parse_field(f.next())?;
                    *rhs.get_mut(i).ok_or_else(|| Error::Parse(format!("row {i} out of range")))? = parse_field(f.next())?;
                }
                Some("a") => {
                    let i: usize = parse_field(f.next())?;
                    let j: usize = parse_field(f.next())?;
                    let v: f64 = parse_field(f.next())?;
                    cols.get_mut(j).ok_or_else(|| Error::Parse(format!("column {j} out of range")))?.push((i, v));
                }
                Some(tag) => return Err(Error::Parse(format!("unknown LP dump record `{tag}`"))),
            }
        }
        let mut a = CscMatrix::new(m);
        for col in cols {
            a.push_column(col)?;
        }
        LpProblem::new(objective, a, rhs)
    }
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>) -> Result<T> {
    let s = s.ok_or_else(|| Error::Parse("truncated LP dump line".into()))?;
    s.parse().map_err(|_| Error::Parse(format!("bad LP dump field `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_column_merges_duplicates() {
        let mut m = CscMatrix::new(3);
        m.push_column([(2, 1.0), (0, 2.0), (2, -1.0), (1, 0.5)]).unwrap();
        assert_eq!(m.column(0).collect::<Vec<_>>(), vec![(0, 2.0), (1, 0.5)]);
        assert!(m.push_column([(3, 1.0)]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let a = CscMatrix::from_dense(&[vec![1.0, 0.1, 0.0], vec![0.0, -2.5e-17, 3.0]]).unwrap();
        let p = LpProblem::new(vec![1.0, 0.0, -1.0 / 3.0], a, vec![1.0, 0.0]).unwrap();
        let text = p.to_dump();
        let q = LpProblem::from_dump(text.as_bytes()).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.to_dump(), text);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = CscMatrix::from_dense(&[vec![1.0, 1.0]]).unwrap();
        assert!(LpProblem::new(vec![1.0], a.clone(), vec![1.0]).is_err());
        assert!(LpProblem::new(vec![1.0, 1.0], a, vec![1.0, 2.0]).is_err());
    }
}
