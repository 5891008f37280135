use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::model::MdpModel;
use super::policy::Policy;
use crate::error::{Error, Result};
use crate::lp::SparseLu;

/// Recurrent structure of the chain induced by a policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    /// States of the single closed class, ascending.
    pub recurrent: Vec<usize>,
    pub transient: usize,
    pub period: usize,
}

/// Transition matrix `Q(g)` as merged sparse rows, and the reward vector `r(g)`.
fn induced_chain(mdp: &MdpModel, policy: &Policy) -> Result<(Vec<Vec<(usize, f64)>>, Vec<f64>)> {
    if policy.num_states() != mdp.num_states() {
        return Err(Error::config("policy does not match the model"));
    }
    let n = mdp.num_states();
    let mut rows = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for x in 0..n {
        if !policy.is_defined(x) {
            return Err(Error::PolicyUndefined(mdp.state_label(x)));
        }
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut r = 0.0;
        for &(a, g) in policy.distribution(x) {
            let sa = &mdp.actions(x)[a];
            r += g * sa.reward;
            row.extend(sa.outcomes.iter().map(|o| (o.next, g * o.prob)));
        }
        rows.push(merge(row));
        rewards.push(r);
    }
    Ok((rows, rewards))
}

fn merge(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (j, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn analyze(rows: &[Vec<(usize, f64)>]) -> Result<ChainSummary> {
    let n = rows.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, rows.iter().map(Vec::len).sum());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (i, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; n];
    for (c, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp[v.index()] = c;
        }
    }
    let closed: Vec<usize> = (0..sccs.len())
        .filter(|&c| sccs[c].iter().all(|v| rows[v.index()].iter().all(|&(j, _)| comp[j] == c)))
        .collect();
    if closed.len() != 1 {
        return Err(Error::NotUnichain(format!("{} closed classes", closed.len())));
    }
    let c = closed[0];
    let mut recurrent: Vec<usize> = sccs[c].iter().map(|v| v.index()).collect();
    recurrent.sort_unstable();

    // period = gcd of level(u) + 1 - level(v) over the class's edges
    let mut level = vec![usize::MAX; n];
    let root = recurrent[0];
    level[root] = 0;
    let mut frontier = vec![root];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for u in frontier {
            for &(v, _) in &rows[u] {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    let mut period = 0;
    for &u in &recurrent {
        for &(v, _) in &rows[u] {
            period = gcd(period, (level[u] + 1).abs_diff(level[v]));
        }
    }
    if period != 1 {
        return Err(Error::Periodic(period));
    }
    Ok(ChainSummary {
        transient: n - recurrent.len(),
        recurrent,
        period,
    })
}

/// Checks that the policy's chain has one closed class and that it is aperiodic.
pub fn check_chain(mdp: &MdpModel, policy: &Policy) -> Result<ChainSummary> {
    let (rows, _) = induced_chain(mdp, policy)?;
    analyze(&rows)
}

fn stationary(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let summary = analyze(rows)?;
    let class = &summary.recurrent;
    let mut local = vec![usize::MAX; rows.len()];
    for (k, &x) in class.iter().enumerate() {
        local[x] = k;
    }
    // Column i holds unknown pi_i: row j gets delta_ij - Q_ij, row 0 is replaced by ones.
    let m = class.len();
    let cols: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&x| {
            let mut col: Vec<(usize, f64)> = rows[x].iter().map(|&(j, q)| (local[j], -q)).collect();
            col.push((local[x], 1.0));
            let mut col = merge(col);
            col.retain(|e| e.0 != 0);
            col.push((0, 1.0));
            col
        })
        .collect();
    let lu = SparseLu::factor(&cols, 1e-14)?;
    let mut rhs = vec![0.0; m];
    rhs[0] = 1.0;
    let pi_local = lu.solve(&rhs);
    if pi_local.iter().any(|p| !p.is_finite() || *p < -1e-9) {
        return Err(Error::Numerical("stationary distribution solve produced invalid values".into()));
    }
    let mut pi = vec![0.0; rows.len()];
    for (k, &x) in class.iter().enumerate() {
        pi[x] = pi_local[k].max(0.0);
    }
    Ok(pi)
}

/// Solves `pi = pi Q(g)`, `sum pi = 1` on the recurrent class (transient
/// states get zero mass).
pub fn stationary_distribution(mdp: &MdpModel, policy: &Policy) -> Result<Vec<f64>> {
    let (rows, _) = induced_chain(mdp, policy)?;
    stationary(&rows)
}

/// Long-run average reward per round, `pi(g) . r(g)`.
pub fn evaluate_policy(mdp: &MdpModel, policy: &Policy) -> Result<f64> {
    let (rows, rewards) = induced_chain(mdp, policy)?;
    let pi = stationary(&rows)?;
    Ok(pi.iter().zip(&rewards).map(|(p, r)| p * r).sum())
}

/// Exact long-run performance of a policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyReport {
    pub avg_reward_per_block: f64,
    /// Average reward per block divided by messages delivered per block.
    pub per_message_distortion: f64,
    /// Fraction of departing messages that were decoded.
    pub delivery_rate: f64,
    /// Fraction of departing messages dropped at their deadline.
    pub deadline_violation_rate: f64,
    /// Fraction of departing messages whose ARQ window ran out.
    pub arq_failure_rate: f64,
    /// Delivered bits per channel use.
    pub throughput_eta: f64,
}

impl PolicyReport {
    pub(crate) fn from_totals(reward: f64, delivered: f64, dropped: f64, failed: f64, bits: f64, t: f64) -> Self {
        // every arrival departs exactly once, so in steady state departures = arrivals
        let departed = delivered + dropped + failed;
        let per_departure = |v: f64| if departed > 0.0 { v / departed } else { 0.0 };
        let per_message_distortion = if delivered > 0.0 {
            reward / delivered
        } else if reward == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        PolicyReport {
            avg_reward_per_block: reward,
            per_message_distortion,
            delivery_rate: per_departure(delivered),
            deadline_violation_rate: per_departure(dropped),
            arq_failure_rate: per_departure(failed),
            throughput_eta: bits / t,
        }
    }
}

pub fn policy_report(mdp: &MdpModel, policy: &Policy) -> Result<PolicyReport> {
    let chan = mdp.channel().ok_or_else(|| Error::config("policy report needs an ARQ model"))?;
    let pi = stationary_distribution(mdp, policy)?;
    let (mut reward, mut delivered, mut dropped, mut failed, mut bits) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, &px) in pi.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        for &(a, g) in policy.distribution(x) {
            for o in &mdp.actions(x)[a].outcomes {
                let w = px * g * o.prob;
                reward += w * o.reward;
                delivered += w * o.events.delivered as u8 as f64;
                failed += w * o.events.arq_failed as u8 as f64;
                dropped += w * o.events.dropped as f64;
                bits += w * o.events.bits;
            }
        }
    }
    Ok(PolicyReport::from_totals(
        reward,
        delivered,
        dropped,
        failed,
        bits,
        chan.block_length as f64,
    ))
}
