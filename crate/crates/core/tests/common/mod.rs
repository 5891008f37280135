#![allow(dead_code)]

use dmdt_core::mdp::MdpModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(M - i)(N - i)` at integers, linear in between.
pub fn d_star(m: u32, n: u32, r: f64) -> f64 {
    let (m, n) = (m as f64, n as f64);
    let i = r.floor().min(m.min(n) - 1.0).max(0.0);
    let left = (m - i) * (n - i);
    let right = (m - i - 1.0) * (n - i - 1.0);
    left + (r - i) * (right - left)
}

/// Argmin of `f` on `[lo, hi]`: a coarse pass, then a `fine` step scan
/// around the coarse winner. Valid for unimodal `f`.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, fine: f64) -> f64 {
    let coarse = 1e-4f64.max(fine);
    let steps = ((hi - lo) / coarse).ceil() as usize;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=steps {
        let r = (lo + i as f64 * coarse).min(hi);
        let v = f(r);
        if v < best.0 {
            best = (v, r);
        }
    }
    let (a, b) = ((best.1 - 2.0 * coarse).max(lo), (best.1 + 2.0 * coarse).min(hi));
    let steps = ((b - a) / fine).ceil() as usize;
    for i in 0..=steps {
        let r = (a + i as f64 * fine).min(b);
        let v = f(r);
        if v < best.0 {
            best = (v, r);
        }
    }
    best.1
}

/// `pi = pi Q`, `sum pi = 1` by a dense LU solve with the first balance
/// equation replaced by normalization.
pub fn dense_stationary(q: &DMatrix<f64>) -> DVector<f64> {
    let n = q.nrows();
    let mut a = (DMatrix::<f64>::identity(n, n) - q).transpose();
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    a.lu().solve(&b).expect("unichain policy gives a nonsingular system")
}

/// Transition matrix and reward vector of the deterministic policy `slots`.
pub fn dense_chain(mdp: &MdpModel, slots: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let n = mdp.num_states();
    let mut q = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for x in 0..n {
        let sa = &mdp.actions(x)[slots[x]];
        r[x] = sa.reward;
        for o in &sa.outcomes {
            q[(x, o.next)] += o.prob;
        }
    }
    (q, r)
}

pub fn dense_policy_value(mdp: &MdpModel, slots: &[usize]) -> f64 {
    let (q, r) = dense_chain(mdp, slots);
    dense_stationary(&q).dot(&r)
}

/// Best deterministic policy by exhaustive enumeration.
pub fn brute_force_optimum(mdp: &MdpModel) -> (f64, Vec<usize>) {
    let n = mdp.num_states();
    let counts: Vec<usize> = (0..n).map(|x| mdp.actions(x).len()).collect();
    let mut slots = vec![0usize; n];
    let mut best = (f64::INFINITY, slots.clone());
    loop {
        let v = dense_policy_value(mdp, &slots);
        if v < best.0 {
            best = (v, slots.clone());
        }
        // odometer over the action counts
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            slots[i] += 1;
            if slots[i] < counts[i] {
                break;
            }
            slots[i] = 0;
            i += 1;
        }
    }
}

/// Random MDP with strictly positive transitions (hence unichain and aperiodic).
pub fn random_mdp(seed: u64, states: usize, actions: usize) -> MdpModel {
    let mut g = rng(seed);
    let rows = (0..states)
        .map(|_| {
            (0..actions)
                .map(|_| {
                    let w: Vec<f64> = (0..states).map(|_| g.random::<f64>() + 0.05).collect();
                    let total: f64 = w.iter().sum();
                    let mut trans: Vec<(usize, f64)> = w.iter().enumerate().map(|(j, v)| (j, v / total)).collect();
                    // absorb rounding so the row sums to one
                    let s: f64 = trans[1..].iter().map(|t| t.1).sum();
                    trans[0].1 = 1.0 - s;
                    (g.random::<f64>() * 3.0, trans)
                })
                .collect()
        })
        .collect();
    MdpModel::from_tables(rows).unwrap()
}

/// Minimum of `c.x` over `A x = b, x >= 0` by enumerating all bases.
pub fn vertex_enumeration(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Option<f64> {
    let (m, n) = a.shape();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let basis = a.select_columns(idx.iter());
        if basis.determinant().abs() > 1e-10 {
            if let Some(xb) = basis.lu().solve(b) {
                if xb.iter().all(|&v| v >= -1e-10) {
                    let obj: f64 = idx.iter().zip(xb.iter()).map(|(&j, &v)| c[j] * v).sum();
                    best = Some(best.map_or(obj, |o: f64| o.min(obj)));
                }
            }
        }
        // next m-combination of 0..n
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < n - m + i {
                idx[i] += 1;
                for k in i + 1..m {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Feasible, bounded LP with `m` rows (the last one sums all variables) and `n` columns.
pub fn random_lp(seed: u64, m: usize, n: usize) -> (dmdt_core::lp::LpProblem, DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut g = rng(seed);
    let a = DMatrix::from_fn(m, n, |i, _| if i + 1 == m { 1.0 } else { g.random_range(-1.0..1.0) });
    let x0 = DVector::from_fn(n, |_, _| g.random::<f64>());
    let b = &a * &x0;
    let c = DVector::from_fn(n, |_, _| g.random_range(-1.0..1.0));
    let rows: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).iter().copied().collect()).collect();
    let p = dmdt_core::lp::LpProblem::new(
        c.iter().copied().collect(),
        dmdt_core::lp::CscMatrix::from_dense(&rows).unwrap(),
        b.iter().copied().collect(),
    )
    .unwrap();
    (p, a, b, c)
}
