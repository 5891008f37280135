use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::MdpModel;
use super::state::{ActionId, MdpState};
use crate::error::{Error, Result};
use crate::lp::{LpSolution, LpStatus};

const DIST_TOL: f64 = 1e-9;

/// Randomized stationary policy: for each state, `(action slot, probability)`
/// pairs over that state's admissible actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    dist: Vec<Vec<(usize, f64)>>,
    fallback: Vec<bool>,
}

impl Policy {
    /// An empty distribution marks a state where the policy is undefined.
    pub fn from_distributions(mdp: &MdpModel, dist: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if dist.len() != mdp.num_states() {
            return Err(Error::config(format!(
                "policy covers {} states, model has {}",
                dist.len(),
                mdp.num_states()
            )));
        }
        for (x, d) in dist.iter().enumerate() {
            if d.is_empty() {
                continue;
            }
            let n = mdp.actions(x).len();
            if d.iter().any(|&(a, p)| a >= n || !(p >= 0.0)) {
                return Err(Error::config(format!("invalid action distribution at {}", mdp.state_label(x))));
            }
            let total: f64 = d.iter().map(|e| e.1).sum();
            if (total - 1.0).abs() > DIST_TOL {
                return Err(Error::config(format!(
                    "action distribution at {} sums to {total}",
                    mdp.state_label(x)
                )));
            }
        }
        let fallback = vec![false; dist.len()];
        Ok(Policy { dist, fallback })
    }

    /// Deterministic policy from one action slot per state.
    pub fn deterministic(mdp: &MdpModel, slots: &[usize]) -> Result<Self> {
        Self::from_distributions(mdp, slots.iter().map(|&a| vec![(a, 1.0)]).collect())
    }

    /// Every admissible action with equal probability.
    pub fn uniform(mdp: &MdpModel) -> Self {
        let dist = (0..mdp.num_states())
            .map(|x| {
                let n = mdp.actions(x).len();
                (0..n).map(|a| (a, 1.0 / n as f64)).collect()
            })
            .collect();
        Policy {
            dist,
            fallback: vec![false; mdp.num_states()],
        }
    }

    /// The static policy that starts every ARQ block with `(r, L)`.
    pub fn fixed(mdp: &MdpModel, rate: usize, window: u32) -> Result<Self> {
        let cfg = mdp
            .arq_config()
            .ok_or_else(|| Error::config("fixed (r, L) policies need an ARQ model"))?;
        if rate >= cfg.allowed_r.len() || window == 0 || window > cfg.max_window {
            return Err(Error::config(format!("fixed action (rate #{rate}, L={window}) outside the action set")));
        }
        let want = ActionId::Transmit { rate, window };
        let slots = (0..mdp.num_states())
            .map(|x| {
                let acts = mdp.actions(x);
                acts.iter().position(|sa| sa.action == want).unwrap_or(0)
            })
            .collect::<Vec<_>>();
        Self::deterministic(mdp, &slots)
    }

    pub fn num_states(&self) -> usize {
        self.dist.len()
    }

    pub fn distribution(&self, x: usize) -> &[(usize, f64)] {
        &self.dist[x]
    }

    pub fn is_defined(&self, x: usize) -> bool {
        !self.dist[x].is_empty()
    }

    /// True where the LP assigned zero frequency and the fallback rule chose.
    pub fn is_fallback(&self, x: usize) -> bool {
        self.fallback[x]
    }

    /// Most likely action slot (first one on ties).
    pub fn action_slot(&self, x: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &(a, p) in &self.dist[x] {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((a, p));
            }
        }
        best.map(|b| b.0)
    }

    pub fn is_deterministic(&self) -> bool {
        self.dist.iter().all(|d| d.len() <= 1)
    }

    /// Probability of slot `a` in state `x`.
    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.dist[x].iter().filter(|e| e.0 == a).map(|e| e.1).sum()
    }

    /// Most likely `(r, L)` at the decision state with the given ages.
    pub fn decision_at(&self, mdp: &MdpModel, ages: &[u32]) -> Result<Option<(f64, u32)>> {
        let cfg = mdp.arq_config().ok_or_else(|| Error::config("not an ARQ model"))?;
        let state = MdpState::new(ages, None, cfg)?;
        let x = mdp.state_index(&state).ok_or_else(|| Error::config(format!("unknown state {state}")))?;
        Ok(self.action_slot(x).and_then(|a| match mdp.actions(x)[a].action {
            ActionId::Transmit { rate, window } => Some((cfg.allowed_r[rate], window)),
            _ => None,
        }))
    }

    /// Writes `state_id,ages,round,action_r,action_L,prob` for every decision
    /// state and every action with positive probability.
    pub fn write_csv<W: Write>(&self, mdp: &MdpModel, out: W) -> Result<()> {
        let cfg = mdp.arq_config().ok_or_else(|| Error::config("policy export needs an ARQ model"))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state_id", "ages", "round", "action_r", "action_L", "prob"])?;
        for x in 0..mdp.num_states() {
            let state = mdp.state(x).unwrap();
            if !state.is_decision() {
                continue;
            }
            let ages: Vec<String> = state.ages().iter().map(u32::to_string).collect();
            for &(a, p) in &self.dist[x] {
                if let ActionId::Transmit { rate, window } = mdp.actions(x)[a].action {
                    w.write_record([
                        x.to_string(),
                        ages.join(";"),
                        state.round().to_string(),
                        cfg.allowed_r[rate].to_string(),
                        window.to_string(),
                        p.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Policy::write_csv`]. States with a single
    /// admissible action get it; decision states missing from the file stay
    /// undefined.
    pub fn read_csv<R: Read>(mdp: &MdpModel, input: R) -> Result<Self> {
        let cfg = mdp.arq_config().ok_or_else(|| Error::config("policy import needs an ARQ model"))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["state_id", "ages", "round", "action_r", "action_L", "prob"] {
            return Err(Error::Parse(format!("unexpected policy header `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut dist: Vec<Vec<(usize, f64)>> = (0..mdp.num_states())
            .map(|x| if mdp.actions(x).len() == 1 { vec![(0, 1.0)] } else { Vec::new() })
            .collect();
        for row in rdr.deserialize() {
            let row: PolicyRow = row?;
            let ages = if row.ages.is_empty() {
                Vec::new()
            } else {
                row.ages
                    .split(';')
                    .map(|a| a.parse::<u32>().map_err(|_| Error::Parse(format!("bad age list `{}`", row.ages))))
                    .collect::<Result<Vec<_>>>()?
            };
            let state = MdpState::new(&ages, None, cfg)?;
            let x = mdp.state_index(&state).ok_or_else(|| Error::config(format!("unknown state {state}")))?;
            if x != row.state_id {
                return Err(Error::Parse(format!("state id {} does not match {state} (id {x})", row.state_id)));
            }
            let rate = cfg
                .allowed_r
                .iter()
                .position(|&r| r == row.action_r)
                .ok_or_else(|| Error::config(format!("rate {} not in the action set", row.action_r)))?;
            let want = ActionId::Transmit { rate, window: row.action_l };
            let slot = mdp
                .actions(x)
                .iter()
                .position(|sa| sa.action == want)
                .ok_or_else(|| Error::config(format!("action (r={}, L={}) not admissible at {state}", row.action_r, row.action_l)))?;
            if mdp.actions(x).len() == 1 {
                dist[x].clear();
            }
            dist[x].push((slot, row.prob));
        }
        Self::from_distributions(mdp, dist)
    }
}

#[derive(Deserialize)]
struct PolicyRow {
    state_id: usize,
    ages: String,
    #[allow(dead_code)]
    round: u32,
    action_r: f64,
    #[serde(rename = "action_L")]
    action_l: u32,
    prob: f64,
}

/// Normalizes the optimal state-action frequencies into a policy. States with
/// zero total frequency get the admissible action with the best first-round
/// decode probability (the first such action on ties).
pub fn extract_policy(sol: &LpSolution, mdp: &MdpModel) -> Result<Policy> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::config(format!("cannot extract a policy from a {:?} LP", sol.status)));
    }
    if sol.x.len() != mdp.num_state_actions() {
        return Err(Error::config("LP solution does not match the model"));
    }
    let n = mdp.num_states();
    let mut dist = Vec::with_capacity(n);
    let mut fallback = vec![false; n];
    for (x, fb) in fallback.iter_mut().enumerate() {
        let acts = mdp.actions(x);
        let freqs: Vec<f64> = (0..acts.len()).map(|a| sol.x[mdp.var_index(x, a)].max(0.0)).collect();
        let total: f64 = freqs.iter().sum();
        if total > 0.0 {
            dist.push(
                freqs
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f > 0.0)
                    .map(|(a, &f)| (a, f / total))
                    .collect(),
            );
        } else {
            let mut best = 0;
            for (a, sa) in acts.iter().enumerate() {
                if sa.first_round_success > acts[best].first_round_success {
                    best = a;
                }
            }
            dist.push(vec![(best, 1.0)]);
            *fb = true;
        }
    }
    Ok(Policy { dist, fallback })
}

/// Frequency-weighted mean decision `(r, L)` among decision states with a
/// given number of queued messages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueProfile {
    pub queue_len: usize,
    /// Stationary probability of the decision states in this group.
    pub weight: f64,
    pub mean_r: f64,
    pub mean_window: f64,
}

pub fn queue_length_profile(mdp: &MdpModel, policy: &Policy, stationary: &[f64]) -> Result<Vec<QueueProfile>> {
    let cfg = mdp.arq_config().ok_or_else(|| Error::config("queue profile needs an ARQ model"))?;
    let mut acc = vec![(0.0, 0.0, 0.0); cfg.deadline as usize + 1];
    for x in 0..mdp.num_states() {
        let state = mdp.state(x).unwrap();
        if !state.is_decision() || stationary[x] <= 0.0 {
            continue;
        }
        let slot = &mut acc[state.queue_len()];
        for &(a, p) in policy.distribution(x) {
            if let ActionId::Transmit { rate, window } = mdp.actions(x)[a].action {
                let w = stationary[x] * p;
                slot.0 += w;
                slot.1 += w * cfg.allowed_r[rate];
                slot.2 += w * window as f64;
            }
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .filter(|(_, (w, _, _))| *w > 0.0)
        .map(|(queue_len, (w, r, l))| QueueProfile {
            queue_len,
            weight: w,
            mean_r: r / w,
            mean_window: l / w,
        })
        .collect())
}
