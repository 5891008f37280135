//! Average-reward MDP for delay-constrained messages over a MIMO-ARQ link.
//!
//! Time advances in rounds of `T` channel uses. A message arrives in each
//! round with probability `lambda` and must be decoded within `k_dl` rounds of
//! its arrival. At the start of every ARQ block the transmitter picks a
//! multiplexing gain `r` and a window `L`; the choice is then locked until the
//! message is decoded, the window runs out or the deadline expires. The
//! per-round reward is the distortion realized in that round: the quantizer
//! term `2^{-p s / k}` when an ARQ block completes, one more unit when it
//! completes in failure, and one unit per message dropped at its deadline.

mod chain;
mod model;
mod policy;
mod state;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tradeoff::ChannelConfig;

pub use chain::{
    check_chain, evaluate_policy, policy_report, stationary_distribution, ChainSummary, PolicyReport,
};
pub use model::{
    build_mdp, decode_prob, round_success_prob, solve_mdp, to_lp, DecodeModel, Events, MdpModel,
    MdpSolution, Outcome, StateAction,
};
pub use policy::{extract_policy, queue_length_profile, Policy, QueueProfile};
pub use state::{enumerate_states, ActionId, MdpState, Service};

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

/// Largest supported deadline; queue ages are stored as a bit set.
pub const MAX_DEADLINE: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArqConfig {
    /// Probability `lambda` that a message arrives in a round.
    pub arrival_prob: f64,
    /// Deadline `k_dl` in rounds.
    pub deadline: u32,
    /// Largest ARQ window `L_max`.
    pub max_window: u32,
    /// Multiplexing gains available to the transmitter.
    pub allowed_r: Vec<f64>,
    /// Coding-gain constant `K_e` of the decode model.
    #[serde(default = "default_error_constant")]
    pub error_constant: f64,
    #[serde(default = "default_budget")]
    pub state_budget: usize,
}

fn default_error_constant() -> f64 {
    1.0
}

fn default_budget() -> usize {
    DEFAULT_STATE_BUDGET
}

impl ArqConfig {
    /// The 4x4, 10 dB, `lambda = 0.9` setting with `L <= 4` and integer gains.
    pub fn new(deadline: u32) -> Self {
        ArqConfig {
            arrival_prob: 0.9,
            deadline,
            max_window: 4,
            allowed_r: vec![1.0, 2.0, 3.0, 4.0],
            error_constant: 1.0,
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }

    pub fn validate(&self, chan: &ChannelConfig) -> Result<()> {
        chan.validate()?;
        if !(0.0..1.0).contains(&self.arrival_prob) {
            return Err(Error::config("arrival probability must lie in [0, 1)"));
        }
        if self.deadline == 0 || self.deadline > MAX_DEADLINE {
            return Err(Error::config(format!("deadline must lie in [1, {MAX_DEADLINE}]")));
        }
        if self.max_window == 0 {
            return Err(Error::config("maximum ARQ window must be at least 1"));
        }
        if self.allowed_r.is_empty() {
            return Err(Error::config("allowed multiplexing set is empty"));
        }
        let max_r = chan.min_antennas() as f64;
        for (i, &r) in self.allowed_r.iter().enumerate() {
            if !(r > 0.0 && r <= max_r) {
                return Err(Error::config(format!("multiplexing gain {r} outside (0, {max_r}]")));
            }
            if self.allowed_r[..i].contains(&r) {
                return Err(Error::config(format!("duplicate multiplexing gain {r}")));
            }
        }
        if !(self.error_constant > 0.0 && self.error_constant.is_finite()) {
            return Err(Error::config("error constant K_e must be positive and finite"));
        }
        Ok(())
    }
}
