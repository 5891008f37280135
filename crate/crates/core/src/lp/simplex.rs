//! Two-phase revised simplex over a sparse LU basis factorization with
//! product-form eta updates between refactorizations.

use serde::Serialize;

use super::lu::SparseLu;
use super::problem::LpProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Smallest pivot element accepted in the ratio test.
    pub pivot_tolerance: f64,
    /// Reduced costs above `-optimality_tolerance` count as nonnegative.
    pub optimality_tolerance: f64,
    pub feasibility_tolerance: f64,
    /// Pivots between fresh LU factorizations of the basis.
    pub refactor_interval: usize,
    /// Bland's rule engages after `bland_stall_factor * (m + n)` pivots without progress.
    pub bland_stall_factor: usize,
    /// Defaults to `50 * (m + n) + 1000` when `None`.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tolerance: 1e-10,
            optimality_tolerance: 1e-9,
            feasibility_tolerance: 1e-9,
            refactor_interval: 64,
            bland_stall_factor: 3,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution (empty unless optimal).
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iteration_count: usize,
    /// Dual certificate `y` with `A^T y <= c` at optimality (empty otherwise).
    pub duals: Vec<f64>,
    /// Basic variable per row; indices `>= n` are artificial.
    pub basis: Vec<usize>,
}

impl LpSolution {
    /// `||A x - b||_inf`.
    pub fn primal_residual(&self, p: &LpProblem) -> f64 {
        let ax = p.constraints.mul_vec(&self.x);
        ax.iter().zip(&p.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `|c.x - b.y|`.
    pub fn duality_gap(&self, p: &LpProblem) -> f64 {
        let primal: f64 = p.objective.iter().zip(&self.x).map(|(c, x)| c * x).sum();
        let dual: f64 = p.rhs.iter().zip(&self.duals).map(|(b, y)| b * y).sum();
        (primal - dual).abs()
    }

    /// `max_j (a_j . y - c_j)`, positive when the dual certificate is violated.
    pub fn dual_infeasibility(&self, p: &LpProblem) -> f64 {
        (0..p.num_vars())
            .map(|j| p.constraints.col_dot(j, &self.duals) - p.objective[j])
            .fold(0.0, f64::max)
    }
}

struct Eta {
    row: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

struct Simplex<'a> {
    p: &'a LpProblem,
    opts: SimplexOptions,
    m: usize,
    n: usize,
    sign: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    basic_pos: Vec<usize>,
    x_b: Vec<f64>,
    lu: SparseLu,
    etas: Vec<Eta>,
    iterations: usize,
    max_iterations: usize,
}

const LU_ABS_TOL: f64 = 1e-11;

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem, opts: SimplexOptions) -> Result<Self> {
        let m = p.num_constraints();
        let n = p.num_vars();
        let sign: Vec<f64> = p.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = p.rhs.iter().zip(&sign).map(|(b, s)| b * s).collect();
        let basis: Vec<usize> = (n..n + m).collect();
        let mut basic_pos = vec![usize::MAX; n + m];
        for (r, &v) in basis.iter().enumerate() {
            basic_pos[v] = r;
        }
        let identity: Vec<Vec<(usize, f64)>> = (0..m).map(|i| vec![(i, 1.0)]).collect();
        let lu = SparseLu::factor(&identity, LU_ABS_TOL)?;
        Ok(Simplex {
            p,
            opts,
            m,
            n,
            sign,
            x_b: b.clone(),
            b,
            basis,
            basic_pos,
            lu,
            etas: Vec::new(),
            iterations: 0,
            max_iterations: opts.max_iterations.unwrap_or(50 * (m + n) + 1000),
        })
    }

    fn column(&self, var: usize) -> Vec<(usize, f64)> {
        if var >= self.n {
            vec![(var - self.n, 1.0)]
        } else {
            self.p.constraints.column(var).map(|(i, v)| (i, v * self.sign[i])).collect()
        }
    }

    fn dot_column(&self, var: usize, y: &[f64]) -> f64 {
        if var >= self.n {
            y[var - self.n]
        } else {
            self.p.constraints.column(var).map(|(i, v)| v * self.sign[i] * y[i]).sum()
        }
    }

    fn ftran(&self, var: usize) -> Vec<f64> {
        let mut rhs = vec![0.0; self.m];
        for (i, v) in self.column(var) {
            rhs[i] = v;
        }
        let mut x = self.lu.solve(&rhs);
        for eta in &self.etas {
            let xr = x[eta.row] / eta.pivot;
            x[eta.row] = xr;
            if xr != 0.0 {
                for &(i, w) in &eta.entries {
                    x[i] -= w * xr;
                }
            }
        }
        x
    }

    fn btran(&self, mut c: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, w)| w * c[i]).sum();
            c[eta.row] = (c[eta.row] - s) / eta.pivot;
        }
        self.lu.solve_transpose(&c)
    }

    fn refactor(&mut self) -> Result<()> {
        let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&v| self.column(v)).collect();
        self.lu = SparseLu::factor(&cols, LU_ABS_TOL)?;
        self.etas.clear();
        self.x_b = self.lu.solve(&self.b);
        for x in self.x_b.iter_mut() {
            if !x.is_finite() {
                return Err(Error::Numerical("non-finite basic solution after refactorization".into()));
            }
            if *x < 0.0 && *x > -self.opts.feasibility_tolerance {
                *x = 0.0;
            }
        }
        Ok(())
    }

    fn pivot(&mut self, row: usize, entering: usize, w: Vec<f64>, theta: f64) -> Result<()> {
        for (i, x) in self.x_b.iter_mut().enumerate() {
            if i != row {
                *x -= theta * w[i];
                if *x < 0.0 && *x > -self.opts.feasibility_tolerance {
                    *x = 0.0;
                }
            }
        }
        self.x_b[row] = theta;
        let leaving = self.basis[row];
        self.basic_pos[leaving] = usize::MAX;
        self.basis[row] = entering;
        self.basic_pos[entering] = row;
        let entries = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != row && v.abs() > 1e-14)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            row,
            pivot: w[row],
            entries,
        });
        self.iterations += 1;
        if self.etas.len() >= self.opts.refactor_interval {
            self.refactor()?;
        }
        Ok(())
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.x_b).map(|(&v, x)| cost[v] * x).sum()
    }

    /// Runs simplex iterations on `cost` (length n + m). Artificial variables never enter.
    fn run_phase(&mut self, cost: &[f64], phase_two: bool) -> Result<PhaseEnd> {
        let stall_limit = self.opts.bland_stall_factor * (self.m + self.n);
        let mut stall = 0usize;
        let mut bland = stall_limit == 0;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::Numerical(format!(
                    "simplex iteration limit {} reached",
                    self.max_iterations
                )));
            }
            let c_b: Vec<f64> = self.basis.iter().map(|&v| cost[v]).collect();
            let y = self.btran(c_b);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.basic_pos[j] != usize::MAX {
                    continue;
                }
                let d = cost[j] - self.dot_column(j, &y);
                if d < -self.opts.optimality_tolerance {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, d_q)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let w = self.ftran(q);
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite entering column".into()));
            }
            let Some(row) = self.ratio_test(&w, bland, phase_two) else {
                return Ok(PhaseEnd::Unbounded);
            };
            let theta = if w[row] > 0.0 {
                (self.x_b[row] / w[row]).max(0.0)
            } else {
                0.0
            };
            self.pivot(row, q, w, theta)?;

            if theta * d_q < -1e-12 {
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall >= stall_limit {
                    bland = true;
                }
            }
        }
    }

    fn ratio_test(&self, w: &[f64], bland: bool, phase_two: bool) -> Option<usize> {
        let tol = self.opts.pivot_tolerance;
        // Artificials left in the basis after phase one must stay at zero.
        if phase_two {
            if let Some(r) = (0..self.m).find(|&r| self.basis[r] >= self.n && w[r].abs() > tol) {
                return Some(r);
            }
        }
        if bland {
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.m {
                if w[r] > tol {
                    let ratio = self.x_b[r].max(0.0) / w[r];
                    let key = (ratio, self.basis[r], r);
                    if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                        best = Some(key);
                    }
                }
            }
            return best.map(|b| b.2);
        }
        // Harris two-pass: bound the step with a relaxed ratio, then take the
        // largest pivot among rows that block within that bound.
        let feas = self.opts.feasibility_tolerance;
        let mut bound = f64::INFINITY;
        for r in 0..self.m {
            if w[r] > tol {
                bound = bound.min((self.x_b[r].max(0.0) + feas) / w[r]);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        for r in 0..self.m {
            if w[r] > tol && self.x_b[r].max(0.0) / w[r] <= bound && best.is_none_or(|b| w[r] > b.0) {
                best = Some((w[r], r));
            }
        }
        best.map(|b| b.1)
    }

    /// Pivots basic artificials out wherever a structural column can replace them.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let mut e = vec![0.0; self.m];
            e[r] = 1.0;
            let rho = self.btran(e);
            let mut candidate: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.basic_pos[j] != usize::MAX {
                    continue;
                }
                let alpha = self.dot_column(j, &rho);
                if alpha.abs() > 1e-7 && candidate.is_none_or(|(_, a)| alpha.abs() > a.abs()) {
                    candidate = Some((j, alpha));
                }
            }
            if let Some((j, _)) = candidate {
                let w = self.ftran(j);
                self.pivot(r, j, w, 0.0)?;
            }
        }
        Ok(())
    }

    fn solve(mut self) -> Result<LpSolution> {
        let (m, n) = (self.m, self.n);
        let mut phase1 = vec![0.0; n + m];
        phase1[n..].iter_mut().for_each(|c| *c = 1.0);
        match self.run_phase(&phase1, false)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(Error::Numerical("phase one reported an unbounded ray".into()))
            }
        }
        self.refactor()?;
        let infeasibility = self.objective(&phase1);
        let bnorm = self.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeasibility > self.opts.feasibility_tolerance * (1.0 + bnorm) {
            return Ok(self.finish(LpStatus::Infeasible));
        }
        self.drive_out_artificials()?;

        let mut phase2 = vec![0.0; n + m];
        phase2[..n].copy_from_slice(&self.p.objective);
        let end = self.run_phase(&phase2, true)?;
        if let PhaseEnd::Unbounded = end {
            return Ok(self.finish(LpStatus::Unbounded));
        }
        self.refactor()?;

        let mut x = vec![0.0; n];
        for (r, &v) in self.basis.iter().enumerate() {
            if v < n {
                x[v] = self.x_b[r].max(0.0);
            }
        }
        let c_b: Vec<f64> = self.basis.iter().map(|&v| phase2[v]).collect();
        let y_scaled = self.btran(c_b);
        let duals: Vec<f64> = y_scaled.iter().zip(&self.sign).map(|(y, s)| y * s).collect();
        let objective_value = self.p.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
        let sol = LpSolution {
            status: LpStatus::Optimal,
            x,
            objective_value,
            iteration_count: self.iterations,
            duals,
            basis: self.basis,
        };
        let residual = sol.primal_residual(self.p);
        if residual > 1e-9 * (1.0 + bnorm) {
            return Err(Error::Numerical(format!("primal residual {residual:e} after solve")));
        }
        Ok(sol)
    }

    fn finish(self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            x: Vec::new(),
            objective_value: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::NAN,
            },
            iteration_count: self.iterations,
            duals: Vec::new(),
            basis: self.basis,
        }
    }
}

/// Solves `min c.x s.t. A x = b, x >= 0` with default options.
pub fn solve(p: &LpProblem) -> Result<LpSolution> {
    solve_with(p, SimplexOptions::default())
}

pub fn solve_with(p: &LpProblem, opts: SimplexOptions) -> Result<LpSolution> {
    p.validate()?;
    Simplex::new(p, opts)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::problem::CscMatrix;

    fn lp(c: Vec<f64>, a: &[Vec<f64>], b: Vec<f64>) -> LpProblem {
        LpProblem::new(c, CscMatrix::from_dense(a).unwrap(), b).unwrap()
    }

    #[test]
    fn single_variable() {
        let p = lp(vec![1.0], &[vec![1.0]], vec![1.0]);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_optimum() {
        let p = lp(vec![-1.0, -1.0], &[vec![1.0, 1.0]], vec![1.0]);
        let s = solve(&p).unwrap();
        assert!((s.objective_value + 1.0).abs() < 1e-12);
        assert!(s.duality_gap(&p) < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(vec![1.0, 1.0], &[vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0]);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
        let p = lp(vec![-1.0, 0.0], &[vec![1.0, -1.0]], vec![1.0]);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Unbounded);
        let p = lp(vec![1.0], &[vec![1.0]], vec![-1.0]);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // x1 - x2 = -1 twice, minimize x1 + x2: x = (0, 1).
        let p = lp(
            vec![1.0, 1.0],
            &[vec![1.0, -1.0], vec![2.0, -2.0]],
            vec![-1.0, -2.0],
        );
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
        assert!(s.primal_residual(&p) < 1e-12);
        assert!(s.duality_gap(&p) < 1e-10);
        assert!(s.dual_infeasibility(&p) < 1e-9);
    }

    #[test]
    fn deterministic() {
        let p = lp(
            vec![2.0, 3.0, 1.0, 4.0],
            &[vec![1.0, 1.0, 1.0, 1.0], vec![1.0, -1.0, 2.0, 0.0]],
            vec![4.0, 1.0],
        );
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bland_from_the_start_still_solves() {
        let p = lp(
            vec![-3.0, -2.0, 0.0, 0.0],
            &[vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            vec![4.0, 6.0],
        );
        let opts = SimplexOptions {
            bland_stall_factor: 0,
            ..Default::default()
        };
        let s = solve_with(&p, opts).unwrap();
        assert!((s.objective_value + 12.0).abs() < 1e-12);
    }
}
