use std::collections::HashMap;

use super::state::{enumerate_states, ActionId, MdpState, Service};
use super::{ArqConfig, Policy};
use crate::error::{Error, Result};
use crate::exponent::SourceConfig;
use crate::lp::{self, CscMatrix, LpProblem, LpSolution, LpStatus};
use crate::tradeoff::{ChannelConfig, TradeoffCurve};

const ROW_SUM_TOL: f64 = 1e-12;

/// Cumulative decode probability `F(l) = 1 - min(1, K_e SNR^{-d*(r/l)})`.
pub fn decode_prob(r: f64, round: u32, cfg: &ArqConfig, chan: &ChannelConfig) -> Result<f64> {
    if round == 0 {
        return Err(Error::config("round index starts at 1"));
    }
    let d = TradeoffCurve::new(chan)?.with_arq_window(round)?.eval(r)?;
    let fail = cfg.error_constant * chan.snr_linear().powf(-d);
    Ok(1.0 - fail.min(1.0))
}

/// Probability that round `l` decodes given rounds `1..l` did not.
pub fn round_success_prob(r: f64, round: u32, cfg: &ArqConfig, chan: &ChannelConfig) -> Result<f64> {
    let f = decode_prob(r, round, cfg, chan)?;
    let prev = if round > 1 { decode_prob(r, round - 1, cfg, chan)? } else { 0.0 };
    Ok(conditional(prev, f))
}

fn conditional(prev: f64, cur: f64) -> f64 {
    if prev >= 1.0 {
        1.0
    } else {
        ((cur - prev) / (1.0 - prev)).clamp(0.0, 1.0)
    }
}

/// Per-rate table of cumulative decode probabilities for rounds `1..=L_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeModel {
    cumulative: Vec<Vec<f64>>,
}

impl DecodeModel {
    pub fn new(cfg: &ArqConfig, chan: &ChannelConfig) -> Result<Self> {
        let cumulative = cfg
            .allowed_r
            .iter()
            .map(|&r| (1..=cfg.max_window).map(|l| decode_prob(r, l, cfg, chan)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(DecodeModel { cumulative })
    }

    /// Explicit table: `cumulative[rate][l - 1] = F(l)`, non-decreasing in `l`.
    pub fn from_cumulative(cumulative: Vec<Vec<f64>>) -> Result<Self> {
        for row in &cumulative {
            if row.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::config("decode probabilities must lie in [0, 1]"));
            }
            if row.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::config("cumulative decode probability must not decrease"));
            }
        }
        Ok(DecodeModel { cumulative })
    }

    /// Every round decodes.
    pub fn perfect(rates: usize, max_window: u32) -> Self {
        DecodeModel {
            cumulative: vec![vec![1.0; max_window as usize]; rates],
        }
    }

    fn check_shape(&self, cfg: &ArqConfig) -> Result<()> {
        if self.cumulative.len() != cfg.allowed_r.len()
            || self.cumulative.iter().any(|r| r.len() != cfg.max_window as usize)
        {
            return Err(Error::config("decode table shape does not match the action set"));
        }
        Ok(())
    }

    pub fn cumulative(&self, rate: usize, round: u32) -> f64 {
        if round == 0 {
            0.0
        } else {
            self.cumulative[rate][round as usize - 1]
        }
    }

    pub fn round_success(&self, rate: usize, round: u32) -> f64 {
        conditional(self.cumulative(rate, round - 1), self.cumulative(rate, round))
    }
}

/// Bookkeeping attached to a transition, used for rates and traces.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Events {
    pub arrived: bool,
    pub delivered: bool,
    /// The ARQ window ran out without a decode.
    pub arq_failed: bool,
    /// A round failed but the block continues.
    pub nack: bool,
    pub dropped: u32,
    /// Bits delivered in this round.
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub next: usize,
    pub reward: f64,
    pub events: Events,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateAction {
    pub action: ActionId,
    /// Expected one-round reward.
    pub reward: f64,
    pub outcomes: Vec<Outcome>,
    /// Decode probability of the first round; ranks fallback actions.
    pub first_round_success: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ArqParts {
    pub cfg: ArqConfig,
    pub chan: ChannelConfig,
    pub src: SourceConfig,
    pub decode: DecodeModel,
    pub states: Vec<MdpState>,
    pub index: HashMap<MdpState, usize>,
}

/// Finite average-reward MDP: per state, the admissible actions with their
/// transition rows. Built either from the ARQ queue model or from tables.
#[derive(Debug, Clone)]
pub struct MdpModel {
    actions: Vec<Vec<StateAction>>,
    offsets: Vec<usize>,
    arq: Option<Box<ArqParts>>,
}

pub fn build_mdp(cfg: &ArqConfig, chan: &ChannelConfig, src: &SourceConfig) -> Result<MdpModel> {
    cfg.validate(chan)?;
    let decode = DecodeModel::new(cfg, chan)?;
    MdpModel::with_decode(cfg, chan, src, decode)
}

impl MdpModel {
    /// ARQ model with an explicit decode table in place of the exponent model.
    pub fn with_decode(cfg: &ArqConfig, chan: &ChannelConfig, src: &SourceConfig, decode: DecodeModel) -> Result<Self> {
        cfg.validate(chan)?;
        src.validate()?;
        decode.check_shape(cfg)?;
        let states = enumerate_states(cfg)?;
        let index: HashMap<MdpState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let kernel = Kernel::new(cfg, chan, src, &decode);

        let mut actions = Vec::with_capacity(states.len());
        for (x, state) in states.iter().enumerate() {
            let mut row = Vec::new();
            for action in state.admissible_actions(cfg) {
                let mut outcomes = Vec::new();
                for (prob, next, reward, events) in kernel.transitions(state, action)? {
                    let next = *index
                        .get(&next)
                        .ok_or_else(|| Error::Numerical(format!("transition from {state} leaves the state space ({next})")))?;
                    outcomes.push(Outcome {
                        prob,
                        next,
                        reward,
                        events,
                    });
                }
                let first_round_success = match action {
                    ActionId::Transmit { rate, .. } => decode.cumulative(rate, 1),
                    _ => 0.0,
                };
                row.push(state_action(x, action, outcomes, first_round_success)?);
            }
            actions.push(row);
        }
        let arq = ArqParts {
            cfg: cfg.clone(),
            chan: *chan,
            src: *src,
            decode,
            states,
            index,
        };
        Ok(Self::assemble(actions, Some(Box::new(arq))))
    }

    /// Generic MDP from `rows[x][a] = (reward, [(next, prob)])`.
    pub fn from_tables(rows: Vec<Vec<(f64, Vec<(usize, f64)>)>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::config("MDP needs at least one state"));
        }
        let mut actions = Vec::with_capacity(n);
        for (x, row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(Error::config(format!("state {x} has no actions")));
            }
            let mut sa = Vec::with_capacity(row.len());
            for (a, (reward, trans)) in row.into_iter().enumerate() {
                if !reward.is_finite() {
                    return Err(Error::config(format!("non-finite reward at state {x}")));
                }
                let mut outcomes = Vec::with_capacity(trans.len());
                for (next, prob) in trans {
                    if next >= n || !(0.0..=1.0).contains(&prob) {
                        return Err(Error::config(format!("bad transition ({next}, {prob}) at state {x}")));
                    }
                    outcomes.push(Outcome {
                        prob,
                        next,
                        reward,
                        events: Events::default(),
                    });
                }
                sa.push(state_action(x, ActionId::Choice(a), outcomes, 0.0)?);
            }
            actions.push(sa);
        }
        Ok(Self::assemble(actions, None))
    }

    fn assemble(actions: Vec<Vec<StateAction>>, arq: Option<Box<ArqParts>>) -> Self {
        let mut offsets = Vec::with_capacity(actions.len() + 1);
        let mut acc = 0;
        for row in &actions {
            offsets.push(acc);
            acc += row.len();
        }
        offsets.push(acc);
        MdpModel { actions, offsets, arq }
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn num_state_actions(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn actions(&self, x: usize) -> &[StateAction] {
        &self.actions[x]
    }

    /// LP variable index of `(x, slot)`.
    pub fn var_index(&self, x: usize, slot: usize) -> usize {
        self.offsets[x] + slot
    }

    pub fn state(&self, x: usize) -> Option<&MdpState> {
        self.arq.as_ref().map(|a| &a.states[x])
    }

    pub fn states(&self) -> Option<&[MdpState]> {
        self.arq.as_ref().map(|a| a.states.as_slice())
    }

    pub fn state_index(&self, s: &MdpState) -> Option<usize> {
        self.arq.as_ref().and_then(|a| a.index.get(s).copied())
    }

    pub fn arq_config(&self) -> Option<&ArqConfig> {
        self.arq.as_ref().map(|a| &a.cfg)
    }

    pub fn channel(&self) -> Option<&ChannelConfig> {
        self.arq.as_ref().map(|a| &a.chan)
    }

    pub fn source(&self) -> Option<&SourceConfig> {
        self.arq.as_ref().map(|a| &a.src)
    }

    pub fn decode_model(&self) -> Option<&DecodeModel> {
        self.arq.as_ref().map(|a| &a.decode)
    }

    /// Multiplexing gain of a rate index.
    pub fn rate_value(&self, rate: usize) -> Option<f64> {
        self.arq.as_ref().and_then(|a| a.cfg.allowed_r.get(rate).copied())
    }

    pub fn state_label(&self, x: usize) -> String {
        match self.state(x) {
            Some(s) => format!("#{x} {s}"),
            None => format!("#{x}"),
        }
    }

    /// Outcome selected by a uniform draw `u` in `[0, 1)`.
    pub fn sample(&self, x: usize, slot: usize, u: f64) -> &Outcome {
        let outcomes = &self.actions[x][slot].outcomes;
        let mut acc = 0.0;
        for o in outcomes {
            acc += o.prob;
            if u < acc {
                return o;
            }
        }
        // rounding left a sliver above the last cumulative value
        outcomes.iter().rev().find(|o| o.prob > 0.0).unwrap_or(&outcomes[outcomes.len() - 1])
    }
}

fn state_action(x: usize, action: ActionId, outcomes: Vec<Outcome>, first_round_success: f64) -> Result<StateAction> {
    let sum: f64 = outcomes.iter().map(|o| o.prob).sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::BadTransitionRow {
            state: x,
            action: format!("{action:?}"),
            sum,
        });
    }
    let reward = outcomes.iter().map(|o| o.prob * o.reward).sum();
    Ok(StateAction {
        action,
        reward,
        outcomes,
        first_round_success,
    })
}

struct Kernel<'a> {
    cfg: &'a ArqConfig,
    decode: &'a DecodeModel,
    source_terms: Vec<f64>,
    bits: Vec<f64>,
}

enum RoundResult {
    Idle,
    Decoded,
    Failed,
}

impl<'a> Kernel<'a> {
    fn new(cfg: &'a ArqConfig, chan: &ChannelConfig, src: &SourceConfig, decode: &'a DecodeModel) -> Self {
        let bits: Vec<f64> = cfg.allowed_r.iter().map(|&r| src.bits_per_message(chan, r)).collect();
        let source_terms = bits.iter().map(|&b| src.quantizer_distortion(b)).collect();
        Kernel {
            cfg,
            decode,
            source_terms,
            bits,
        }
    }

    /// One round: transmit (if any), complete or continue the ARQ block,
    /// age the queue and drop expired messages, then admit an arrival.
    fn transitions(&self, state: &MdpState, action: ActionId) -> Result<Vec<(f64, MdpState, f64, Events)>> {
        let queue = state.queue_bits();
        let service = match (state.service(), action) {
            (None, ActionId::Continue) if queue == 0 => None,
            (None, ActionId::Transmit { rate, window }) if queue != 0 => Some(Service {
                rate,
                window,
                rounds_done: 0,
            }),
            (Some(s), ActionId::Continue) => Some(s),
            _ => return Err(Error::config(format!("action {action:?} not admissible in state {state}"))),
        };

        let branches = match service {
            None => vec![(1.0, RoundResult::Idle)],
            Some(s) => {
                let p = self.decode.round_success(s.rate, s.rounds_done + 1);
                vec![(p, RoundResult::Decoded), (1.0 - p, RoundResult::Failed)]
            }
        };

        let lambda = self.cfg.arrival_prob;
        let k = self.cfg.deadline;
        let mut out = Vec::with_capacity(4);
        for (p_round, result) in branches {
            if p_round <= 0.0 {
                continue;
            }
            let mut q = queue;
            let mut svc = service;
            let mut reward = 0.0;
            let mut ev = Events::default();
            let head = state.head_age().map(|h| 1u32 << h);
            match (result, service) {
                (RoundResult::Decoded, Some(s)) => {
                    q &= !head.unwrap();
                    svc = None;
                    reward += self.source_terms[s.rate];
                    ev.delivered = true;
                    ev.bits = self.bits[s.rate];
                }
                (RoundResult::Failed, Some(s)) => {
                    let done = s.rounds_done + 1;
                    if done == s.window {
                        q &= !head.unwrap();
                        svc = None;
                        reward += self.source_terms[s.rate] + 1.0;
                        ev.arq_failed = true;
                    } else {
                        svc = Some(Service { rounds_done: done, ..s });
                        ev.nack = true;
                    }
                }
                _ => {}
            }
            q <<= 1;
            if q & (1 << k) != 0 {
                // only the head can expire; an unfinished block is abandoned
                q &= !(1 << k);
                reward += 1.0;
                ev.dropped += 1;
                svc = None;
            }
            for (p_arr, arrived) in [(lambda, true), (1.0 - lambda, false)] {
                if p_arr <= 0.0 {
                    continue;
                }
                let next = MdpState::from_parts(q | arrived as u32, svc);
                out.push((p_round * p_arr, next, reward, Events { arrived, ..ev }));
            }
        }
        Ok(out)
    }
}

/// The state-action frequency LP: minimize `sum r(x,a) s_xa` subject to
/// one balance row per state and a normalization row.
pub fn to_lp(mdp: &MdpModel) -> Result<LpProblem> {
    let n = mdp.num_states();
    let mut a = CscMatrix::new(n + 1);
    let mut c = Vec::with_capacity(mdp.num_state_actions());
    for x in 0..n {
        for sa in mdp.actions(x) {
            let col = std::iter::once((x, 1.0))
                .chain(sa.outcomes.iter().map(|o| (o.next, -o.prob)))
                .chain(std::iter::once((n, 1.0)));
            a.push_column(col)?;
            c.push(sa.reward);
        }
    }
    let mut b = vec![0.0; n + 1];
    b[n] = 1.0;
    LpProblem::new(c, a, b)
}

#[derive(Debug, Clone)]
pub struct MdpSolution {
    /// Optimal average reward per round.
    pub objective: f64,
    pub policy: Policy,
    pub lp: LpSolution,
    pub primal_residual: f64,
    pub duality_gap: f64,
}

pub fn solve_mdp(mdp: &MdpModel) -> Result<MdpSolution> {
    let problem = to_lp(mdp)?;
    let lp = lp::solve(&problem)?;
    if lp.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("MDP linear program reported {:?}", lp.status)));
    }
    let policy = super::extract_policy(&lp, mdp)?;
    Ok(MdpSolution {
        objective: lp.objective_value,
        primal_residual: lp.primal_residual(&problem),
        duality_gap: lp.duality_gap(&problem),
        policy,
        lp,
    })
}
