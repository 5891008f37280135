use std::collections::BTreeMap;
use std::path::Path;

use dmdt_core::mdp::{
    build_mdp, evaluate_policy, policy_report, queue_length_profile, solve_mdp, stationary_distribution, MdpModel,
    Policy, PolicyReport, QueueProfile,
};
use dmdt_core::sim::{run, run_traced, SimReport};
use rayon::prelude::*;

use crate::config::{PolicyChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, with_comment, write_atomic, CsvDoc};

/// LP and the exact objective may differ by solver round-off only.
const RECHECK_TOL: f64 = 1e-8;

struct Solved {
    deadline: u32,
    states: usize,
    state_actions: usize,
    iterations: usize,
    lp_objective: f64,
    evaluated: f64,
    report: PolicyReport,
    empty_queue: Option<(f64, u32)>,
    profile: Vec<QueueProfile>,
    policy_csv: Vec<u8>,
}

fn solve_one(cfg: &RunConfig, deadline: u32) -> CliResult<Solved> {
    let mdp = build_mdp(&cfg.arq_for(deadline), &cfg.channel, &cfg.source)?;
    let sol = solve_mdp(&mdp)?;
    let evaluated = evaluate_policy(&mdp, &sol.policy)?;
    if (evaluated - sol.objective).abs() > RECHECK_TOL {
        return Err(CliError::Numerical(format!(
            "k_dl = {deadline}: LP objective {} disagrees with the exact policy value {evaluated}",
            sol.objective
        )));
    }
    let pi = stationary_distribution(&mdp, &sol.policy)?;
    let mut policy_csv = Vec::new();
    sol.policy.write_csv(&mdp, &mut policy_csv)?;
    Ok(Solved {
        deadline,
        states: mdp.num_states(),
        state_actions: mdp.num_state_actions(),
        iterations: sol.lp.iteration_count,
        lp_objective: sol.objective,
        evaluated,
        report: policy_report(&mdp, &sol.policy)?,
        empty_queue: sol.policy.decision_at(&mdp, &[0])?,
        profile: queue_length_profile(&mdp, &sol.policy, &pi)?,
        policy_csv,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

pub fn mdp(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let deadlines = cfg.deadlines();
    let solved: Vec<Solved> = deadlines
        .par_iter()
        .map(|&k| solve_one(cfg, k))
        .collect::<CliResult<_>>()?;
    let header = cfg.header_json();

    for s in &solved {
        write_atomic(
            &out.join(format!("policy_kdl{}.csv", s.deadline)),
            &with_comment(&header, &s.policy_csv),
        )?;
    }

    let mut summary = CsvDoc::new(
        &header,
        &[
            "deadline",
            "states",
            "state_actions",
            "lp_iterations",
            "lp_objective",
            "evaluated_objective",
            "per_message_distortion",
            "delivery_rate",
            "deadline_violation_rate",
            "arq_failure_rate",
            "throughput_eta",
            "empty_queue_r",
            "empty_queue_L",
        ],
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    for s in &solved {
        let r = &s.report;
        summary.push(vec![
            s.deadline.to_string(),
            s.states.to_string(),
            s.state_actions.to_string(),
            s.iterations.to_string(),
            num(s.lp_objective),
            num(s.evaluated),
            num(r.per_message_distortion),
            num(r.delivery_rate),
            num(r.deadline_violation_rate),
            num(r.arq_failure_rate),
            num(r.throughput_eta),
            opt(s.empty_queue.map(|e| e.0)),
            opt(s.empty_queue.map(|e| e.1 as f64)),
        ]);
        println!(
            "mdp: k_dl = {}: objective {} ({} states), empty-queue (r, L) = {:?}",
            s.deadline, s.lp_objective, s.states, s.empty_queue
        );
    }
    if !solved.is_empty() {
        // plain mean over the k_dl sweep
        let m = |f: &dyn Fn(&Solved) -> f64| num(mean(solved.iter().map(f)));
        let with_empty: Vec<&Solved> = solved.iter().filter(|s| s.empty_queue.is_some()).collect();
        let m_empty = |f: &dyn Fn((f64, u32)) -> f64| {
            if with_empty.is_empty() {
                String::new()
            } else {
                num(mean(with_empty.iter().map(|s| f(s.empty_queue.unwrap()))))
            }
        };
        summary.push(vec![
            "mean".into(),
            m(&|s| s.states as f64),
            m(&|s| s.state_actions as f64),
            m(&|s| s.iterations as f64),
            m(&|s| s.lp_objective),
            m(&|s| s.evaluated),
            m(&|s| s.report.per_message_distortion),
            m(&|s| s.report.delivery_rate),
            m(&|s| s.report.deadline_violation_rate),
            m(&|s| s.report.arq_failure_rate),
            m(&|s| s.report.throughput_eta),
            m_empty(&|e| e.0),
            m_empty(&|e| e.1 as f64),
        ]);
    }
    summary.write(&out.join("mdp_summary.csv"))?;

    let mut profile = CsvDoc::new(&header, &["deadline", "queue_len", "weight", "mean_r", "mean_L"]);
    let mut by_len: BTreeMap<usize, Vec<&QueueProfile>> = BTreeMap::new();
    for s in &solved {
        for p in &s.profile {
            profile.push(vec![
                s.deadline.to_string(),
                p.queue_len.to_string(),
                num(p.weight),
                num(p.mean_r),
                num(p.mean_window),
            ]);
            by_len.entry(p.queue_len).or_default().push(p);
        }
    }
    for (q, ps) in by_len {
        profile.push(vec![
            "mean".into(),
            q.to_string(),
            num(mean(ps.iter().map(|p| p.weight))),
            num(mean(ps.iter().map(|p| p.mean_r))),
            num(mean(ps.iter().map(|p| p.mean_window))),
        ]);
    }
    profile.write(&out.join("mdp_profile.csv"))
}

pub fn compare(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let rows: Vec<Vec<Vec<String>>> = cfg
        .deadlines()
        .par_iter()
        .map(|&k| {
            let mdp = build_mdp(&cfg.arq_for(k), &cfg.channel, &cfg.source)?;
            let adaptive = solve_mdp(&mdp)?.objective;
            let ratio = |v: f64| v / adaptive;
            let mut rows = Vec::new();
            let mut best: Option<(f64, f64, u32)> = None;
            for (rate, &r) in cfg.arq.allowed_r.iter().enumerate() {
                for window in 1..=cfg.arq.max_window {
                    let v = evaluate_policy(&mdp, &Policy::fixed(&mdp, rate, window)?)?;
                    if adaptive > v + RECHECK_TOL * v.abs().max(1.0) {
                        return Err(CliError::Numerical(format!(
                            "k_dl = {k}: fixed (r={r}, L={window}) value {v} beats the LP optimum {adaptive}"
                        )));
                    }
                    if best.is_none_or(|b| v < b.0) {
                        best = Some((v, r, window));
                    }
                    rows.push(row(k, "fixed", Some((r, window)), v, ratio(v)));
                }
            }
            rows.push(row(k, "adaptive", None, adaptive, 1.0));
            if let Some((v, r, w)) = best {
                println!(
                    "compare: k_dl = {k}: best fixed (r={r}, L={w}) / adaptive = {} ({} dB)",
                    ratio(v),
                    10.0 * ratio(v).log10()
                );
                rows.push(row(k, "best_fixed", Some((r, w)), v, ratio(v)));
            }
            Ok(rows)
        })
        .collect::<CliResult<_>>()?;

    let mut doc = CsvDoc::new(
        &cfg.header_json(),
        &["deadline", "policy", "r", "L", "value", "ratio", "ratio_db"],
    );
    for r in rows.into_iter().flatten() {
        doc.push(r);
    }
    doc.write(&out.join("compare.csv"))
}

fn row(deadline: u32, policy: &str, action: Option<(f64, u32)>, value: f64, ratio: f64) -> Vec<String> {
    vec![
        deadline.to_string(),
        policy.into(),
        action.map_or(String::new(), |a| num(a.0)),
        action.map_or(String::new(), |a| a.1.to_string()),
        num(value),
        num(ratio),
        num(10.0 * ratio.log10()),
    ]
}

fn sim_policy(cfg: &RunConfig, mdp: &MdpModel) -> CliResult<Policy> {
    match &cfg.sim.policy {
        PolicyChoice::Optimal => Ok(solve_mdp(mdp)?.policy),
        PolicyChoice::Fixed { r, window } => {
            let rate = cfg
                .arq
                .allowed_r
                .iter()
                .position(|x| x == r)
                .ok_or_else(|| CliError::Validation(format!("fixed rate {r} is not in arq.allowed_r")))?;
            Ok(Policy::fixed(mdp, rate, *window)?)
        }
        PolicyChoice::File { path } => {
            let f = std::fs::File::open(path)
                .map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
            Ok(Policy::read_csv(mdp, f)?)
        }
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let mdp = build_mdp(&cfg.arq, &cfg.channel, &cfg.source)?;
    let policy = sim_policy(cfg, &mdp)?;
    let exact = evaluate_policy(&mdp, &policy)?;
    let sim = cfg.sim.sim_config();
    let header = cfg.header_json();
    let report: SimReport = if cfg.sim.trace {
        let mut trace = Vec::new();
        let r = run_traced(&mdp, &policy, &sim, &mut trace)?;
        write_atomic(&out.join("trace.csv"), &with_comment(&header, &trace))?;
        r
    } else {
        run(&mdp, &policy, &sim)?
    };
    let within = (report.avg_reward_per_block - exact).abs() <= 3.0 * report.confidence_halfwidth;

    let mut cols: Vec<&str> = SimReport::CSV_HEADER.to_vec();
    cols.extend(["exact_value", "within_3_halfwidths"]);
    let mut doc = CsvDoc::new(&header, &cols);
    let mut rec = report.csv_record();
    rec.push(num(exact));
    rec.push(u8::from(within).to_string());
    doc.push(rec);
    doc.write(&out.join("sim.csv"))?;
    println!(
        "simulate: {} = {} +/- {} (exact {exact}): {}",
        "avg reward per block",
        report.avg_reward_per_block,
        report.confidence_halfwidth,
        if within { "within 3 halfwidths" } else { "OUTSIDE 3 halfwidths" }
    );
    Ok(())
}
