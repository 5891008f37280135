use std::fmt;

use serde::Serialize;

use super::ArqConfig;
use crate::error::{Error, Result};

/// ARQ block in progress: the locked action and the rounds already sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Service {
    /// Index into `ArqConfig::allowed_r`.
    pub rate: usize,
    pub window: u32,
    pub rounds_done: u32,
}

/// Queue of waiting messages plus the ARQ round, observed at a round boundary.
///
/// Ages are stored as a bit set: bit `a` is set when a message that has
/// waited `a` rounds is queued. At most one message arrives per round, so
/// ages are distinct and lie in `[0, k_dl)`. The head (the message served
/// next or being served) is the oldest one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MdpState {
    queue: u32,
    service: Option<Service>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ActionId {
    /// Keep the locked action (mid-block) or wait (empty system).
    Continue,
    Transmit { rate: usize, window: u32 },
    /// Action of a model given by explicit tables.
    Choice(usize),
}

impl MdpState {
    pub fn empty() -> Self {
        MdpState {
            queue: 0,
            service: None,
        }
    }

    pub fn new(ages: &[u32], service: Option<Service>, cfg: &ArqConfig) -> Result<Self> {
        let mut queue = 0u32;
        for &a in ages {
            if a >= cfg.deadline {
                return Err(Error::config(format!("age {a} not below deadline {}", cfg.deadline)));
            }
            if queue & (1 << a) != 0 {
                return Err(Error::config(format!("duplicate age {a}")));
            }
            queue |= 1 << a;
        }
        let s = MdpState { queue, service };
        s.validate(cfg)?;
        Ok(s)
    }

    pub(crate) fn from_parts(queue: u32, service: Option<Service>) -> Self {
        MdpState { queue, service }
    }

    pub fn validate(&self, cfg: &ArqConfig) -> Result<()> {
        if cfg.deadline < 32 && self.queue >> cfg.deadline != 0 {
            return Err(Error::config("queued age at or beyond the deadline"));
        }
        if let Some(s) = self.service {
            let head = self
                .head_age()
                .ok_or_else(|| Error::config("ARQ block in progress with an empty queue"))?;
            if s.rate >= cfg.allowed_r.len() || s.window == 0 || s.window > cfg.max_window {
                return Err(Error::config("in-service action outside the action set"));
            }
            if s.rounds_done == 0 || s.rounds_done >= s.window || s.rounds_done > head {
                return Err(Error::config("in-service round inconsistent with window or head age"));
            }
        }
        Ok(())
    }

    pub fn queue_bits(&self) -> u32 {
        self.queue
    }

    /// Ages in increasing order; the last one is the head.
    pub fn ages(&self) -> Vec<u32> {
        (0..32).filter(|a| self.queue & (1 << a) != 0).collect()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.count_ones() as usize
    }

    pub fn head_age(&self) -> Option<u32> {
        (self.queue != 0).then(|| 31 - self.queue.leading_zeros())
    }

    pub fn service(&self) -> Option<Service> {
        self.service
    }

    /// Rounds already sent in the current ARQ block (0 when none is in progress).
    pub fn round(&self) -> u32 {
        self.service.map_or(0, |s| s.rounds_done)
    }

    /// A new ARQ block starts here and `(r, L)` must be chosen.
    pub fn is_decision(&self) -> bool {
        self.queue != 0 && self.service.is_none()
    }

    pub fn admissible_actions(&self, cfg: &ArqConfig) -> Vec<ActionId> {
        if self.is_decision() {
            (0..cfg.allowed_r.len())
                .flat_map(|rate| (1..=cfg.max_window).map(move |window| ActionId::Transmit { rate, window }))
                .collect()
        } else {
            vec![ActionId::Continue]
        }
    }
}

impl fmt::Display for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ages: Vec<String> = self.ages().iter().map(u32::to_string).collect();
        write!(f, "ages=[{}]", ages.join(","))?;
        if let Some(s) = self.service {
            write!(f, " rate#{} L={} round={}", s.rate, s.window, s.rounds_done)?;
        }
        Ok(())
    }
}

fn mid_block_states(cfg: &ArqConfig, head: u32) -> usize {
    let per_rate: usize = (1..=cfg.max_window).map(|l| (l - 1).min(head) as usize).sum();
    per_rate * cfg.allowed_r.len()
}

/// Number of states [`enumerate_states`] would produce.
pub(crate) fn count_states(cfg: &ArqConfig) -> usize {
    let mut total = 1usize;
    for head in 0..cfg.deadline {
        let configs = 1usize << head;
        total = total.saturating_add(configs.saturating_mul(1 + mid_block_states(cfg, head)));
    }
    total
}

/// Every valid state, ordered by queue bit set and then by ARQ annotation.
///
/// Queue configurations are the `2^k_dl` subsets of `{0, .., k_dl - 1}`;
/// each non-empty one appears once as a decision state and once per
/// `(r, L, round)` with `1 <= round < L` and `round <= head age`.
pub fn enumerate_states(cfg: &ArqConfig) -> Result<Vec<MdpState>> {
    if cfg.deadline == 0 || cfg.deadline > super::MAX_DEADLINE {
        return Err(Error::config(format!("deadline must lie in [1, {}]", super::MAX_DEADLINE)));
    }
    if cfg.max_window == 0 || cfg.allowed_r.is_empty() {
        return Err(Error::config("empty action set"));
    }
    let count = count_states(cfg);
    if count > cfg.state_budget {
        return Err(Error::StateBudget {
            count,
            budget: cfg.state_budget,
            deadline: cfg.deadline,
            max_window: cfg.max_window,
        });
    }
    let mut states = Vec::with_capacity(count);
    states.push(MdpState::empty());
    for queue in 1u32..(1u32 << cfg.deadline) {
        let head = 31 - queue.leading_zeros();
        states.push(MdpState { queue, service: None });
        for rate in 0..cfg.allowed_r.len() {
            for window in 2..=cfg.max_window {
                for rounds_done in 1..window.min(head + 1) {
                    states.push(MdpState {
                        queue,
                        service: Some(Service {
                            rate,
                            window,
                            rounds_done,
                        }),
                    });
                }
            }
        }
    }
    debug_assert_eq!(states.len(), count);
    Ok(states)
}
