mod common;

use dmdt_core::lp::{solve, CscMatrix, LpProblem, LpStatus};
use dmdt_core::mdp::{build_mdp, to_lp, ArqConfig};
use dmdt_core::{ChannelConfig, SourceConfig};

#[test]
fn matches_vertex_enumeration() {
    for seed in 0..20 {
        let (p, a, b, c) = common::random_lp(seed, 4, 8);
        let oracle = common::vertex_enumeration(&a, &b, &c).expect("feasible by construction");
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "seed {seed}");
        assert!((sol.objective_value - oracle).abs() <= 1e-9, "seed {seed}: {} vs {oracle}", sol.objective_value);
        let bnorm = p.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sol.primal_residual(&p) <= 1e-9 * (1.0 + bnorm));
        assert!(sol.x.iter().all(|&v| v >= -1e-12));
        assert!(sol.duality_gap(&p) <= 1e-8 * (1.0 + sol.objective_value.abs()));
        assert!(sol.dual_infeasibility(&p) <= 1e-9);
    }
}

#[test]
fn deterministic() {
    let (p, ..) = common::random_lp(7, 5, 12);
    let a = solve(&p).unwrap();
    let b = solve(&p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trivial_and_degenerate() {
    let p = LpProblem::new(vec![1.0], CscMatrix::from_dense(&[vec![1.0]]).unwrap(), vec![1.0]).unwrap();
    let s = solve(&p).unwrap();
    assert_eq!(s.x, vec![1.0]);
    assert_eq!(s.objective_value, 1.0);

    let p = LpProblem::new(vec![-1.0, -1.0], CscMatrix::from_dense(&[vec![1.0, 1.0]]).unwrap(), vec![1.0]).unwrap();
    assert_eq!(solve(&p).unwrap().objective_value, -1.0);
}

#[test]
fn infeasible_and_unbounded() {
    // x1 + x2 = 1, x1 + x2 = 2
    let p = LpProblem::new(
        vec![0.0, 0.0],
        CscMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
        vec![1.0, 2.0],
    )
    .unwrap();
    assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
    // min -x1 s.t. x1 - x2 = 0
    let p = LpProblem::new(vec![-1.0, 0.0], CscMatrix::from_dense(&[vec![1.0, -1.0]]).unwrap(), vec![0.0]).unwrap();
    assert_eq!(solve(&p).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn redundant_rows_handled() {
    // the second row is twice the first
    let p = LpProblem::new(
        vec![1.0, 2.0, 0.0],
        CscMatrix::from_dense(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0], vec![1.0, 0.0, 0.0]]).unwrap(),
        vec![1.0, 2.0, 0.25],
    )
    .unwrap();
    let s = solve(&p).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective_value - 0.25).abs() < 1e-12);
}

#[test]
fn dump_round_trip_solves_identically() {
    let (p, ..) = common::random_lp(3, 4, 8);
    let q = LpProblem::from_dump(p.to_dump().as_bytes()).unwrap();
    assert_eq!(solve(&p).unwrap(), solve(&q).unwrap());
}

#[test]
fn mdp_lp_certificates() {
    let chan = ChannelConfig::new(4, 4, 1, 10.0).unwrap();
    let src = SourceConfig::new(2.0, 2.0).unwrap();
    for deadline in [2, 4, 5] {
        let mdp = build_mdp(&ArqConfig::new(deadline), &chan, &src).unwrap();
        let p = to_lp(&mdp).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.primal_residual(&p) <= 1e-9 * 2.0);
        assert!(s.duality_gap(&p) <= 1e-8 * (1.0 + s.objective_value.abs()));
        assert!(s.dual_infeasibility(&p) <= 1e-9);
    }
}
