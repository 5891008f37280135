//! Monte-Carlo simulation of the ARQ queue under a policy.
//!
//! Each round draws an action from the policy and then an outcome from the
//! model's own transition lists, so simulated and analytic dynamics cannot
//! drift apart. Steady-state confidence intervals use batch means.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, MdpState, Policy, PolicyReport};

pub const DEFAULT_BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon_blocks: u64,
    #[serde(default)]
    pub warmup_blocks: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

impl SimConfig {
    pub fn new(horizon_blocks: u64, warmup_blocks: u64, seed: u64) -> Self {
        SimConfig {
            horizon_blocks,
            warmup_blocks,
            seed,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_blocks <= self.warmup_blocks {
            return Err(Error::config("horizon must exceed the warmup period"));
        }
        if self.batches < 2 {
            return Err(Error::config("batch means need at least two batches"));
        }
        if self.horizon_blocks - self.warmup_blocks < self.batches as u64 {
            return Err(Error::config("fewer measured blocks than batches"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    /// Blocks after warmup.
    pub blocks: u64,
    pub avg_reward_per_block: f64,
    pub per_message_distortion: f64,
    pub delivery_rate: f64,
    pub deadline_violation_rate: f64,
    pub arq_failure_rate: f64,
    pub throughput_eta: f64,
    /// 95% batch-means halfwidth of `avg_reward_per_block`.
    pub confidence_halfwidth: f64,
    /// Queued messages at round boundaries.
    pub mean_queue_length: f64,
    pub arrival_rate: f64,
    /// Rounds from arrival to departure, over departed messages.
    pub mean_sojourn_blocks: f64,
}

impl SimReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "blocks",
        "avg_reward_per_block",
        "per_message_distortion",
        "delivery_rate",
        "deadline_violation_rate",
        "arq_failure_rate",
        "throughput_eta",
        "confidence_halfwidth",
        "mean_queue_length",
        "arrival_rate",
        "mean_sojourn_blocks",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        [
            self.avg_reward_per_block,
            self.per_message_distortion,
            self.delivery_rate,
            self.deadline_violation_rate,
            self.arq_failure_rate,
            self.throughput_eta,
            self.confidence_halfwidth,
            self.mean_queue_length,
            self.arrival_rate,
            self.mean_sojourn_blocks,
        ]
        .iter()
        .fold(vec![self.blocks.to_string()], |mut v, x| {
            v.push(x.to_string());
            v
        })
    }
}

#[derive(Default)]
struct Tally {
    reward: f64,
    arrived: u64,
    delivered: u64,
    failed: u64,
    dropped: u64,
    bits: f64,
    queue: u64,
    departures: u64,
    sojourn: u64,
}

fn event_label(state: &MdpState, transmitting: bool, ev: &crate::mdp::Events) -> String {
    let mut parts: Vec<&str> = Vec::new();
    if ev.delivered {
        parts.push("delivered");
    } else if ev.arq_failed {
        parts.push("arq_fail");
    } else if ev.nack {
        parts.push("nack");
    } else if transmitting {
        parts.push("abort");
    } else if state.queue_len() == 0 {
        parts.push("idle");
    }
    if ev.dropped > 0 {
        parts.push("drop");
    }
    if ev.arrived {
        parts.push("arrival");
    }
    parts.join("+")
}

/// Simulates from the empty system.
pub fn run(mdp: &MdpModel, policy: &Policy, sim: &SimConfig) -> Result<SimReport> {
    simulate(mdp, policy, sim, None::<&mut csv::Writer<std::io::Sink>>)
}

/// As [`run`], also writing one `block,queue_len,head_age,round,event` row
/// per simulated round (warmup included).
pub fn run_traced<W: Write>(mdp: &MdpModel, policy: &Policy, sim: &SimConfig, trace: W) -> Result<SimReport> {
    let mut w = csv::Writer::from_writer(trace);
    w.write_record(["block", "queue_len", "head_age", "round", "event"])?;
    let report = simulate(mdp, policy, sim, Some(&mut w))?;
    w.flush()?;
    Ok(report)
}

/// Independent replications, one thread each.
pub fn run_replications(mdp: &MdpModel, policy: &Policy, sim: &SimConfig, seeds: &[u64]) -> Vec<Result<SimReport>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| s.spawn(move || run(mdp, policy, &SimConfig { seed, ..*sim })))
            .collect();
        handles.into_iter().map(|h| h.join().expect("replication thread panicked")).collect()
    })
}

fn simulate<W: Write>(
    mdp: &MdpModel,
    policy: &Policy,
    sim: &SimConfig,
    mut trace: Option<&mut csv::Writer<W>>,
) -> Result<SimReport> {
    sim.validate()?;
    let chan = mdp.channel().ok_or_else(|| Error::config("simulation needs an ARQ model"))?;
    if policy.num_states() != mdp.num_states() {
        return Err(Error::config("policy does not match the model"));
    }
    let mut x = mdp
        .state_index(&MdpState::empty())
        .ok_or_else(|| Error::config("model has no empty state"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);

    let measured = sim.horizon_blocks - sim.warmup_blocks;
    let batch_len = measured / sim.batches as u64;
    let mut batch_sums = vec![0.0; sim.batches];
    let mut tally = Tally::default();

    for t in 0..sim.horizon_blocks {
        let dist = policy.distribution(x);
        if dist.is_empty() {
            return Err(Error::PolicyUndefined(mdp.state_label(x)));
        }
        let slot = if dist.len() == 1 {
            dist[0].0
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = dist[dist.len() - 1].0;
            for &(a, p) in dist {
                acc += p;
                if u < acc {
                    pick = a;
                    break;
                }
            }
            pick
        };
        let outcome = mdp.sample(x, slot, rng.random());
        let state = mdp.state(x).expect("ARQ model");
        let ev = &outcome.events;

        if let Some(w) = trace.as_deref_mut() {
            let transmitting = state.service().is_some() || state.is_decision();
            let round = if transmitting { state.round() + 1 } else { 0 };
            w.write_record([
                t.to_string(),
                state.queue_len().to_string(),
                state.head_age().map_or(String::new(), |h| h.to_string()),
                round.to_string(),
                event_label(state, transmitting, ev),
            ])?;
        }

        if t >= sim.warmup_blocks {
            let k = t - sim.warmup_blocks;
            let b = (k / batch_len) as usize;
            if b < sim.batches {
                batch_sums[b] += outcome.reward;
            }
            tally.reward += outcome.reward;
            tally.arrived += ev.arrived as u64;
            tally.delivered += ev.delivered as u64;
            tally.failed += ev.arq_failed as u64;
            tally.dropped += ev.dropped as u64;
            tally.bits += ev.bits;
            tally.queue += state.queue_len() as u64;
            let departures = ev.delivered as u64 + ev.arq_failed as u64 + ev.dropped as u64;
            if departures > 0 {
                let sojourn = state.head_age().map_or(0, |h| h as u64 + 1);
                tally.departures += departures;
                tally.sojourn += departures * sojourn;
            }
        }
        x = outcome.next;
    }

    let n = measured as f64;
    let means: Vec<f64> = batch_sums.iter().map(|s| s / batch_len as f64).collect();
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    let dof = (means.len() - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Numerical(format!("t distribution: {e}")))?
        .inverse_cdf(0.975);
    let halfwidth = t * (var / means.len() as f64).sqrt();

    let exact = PolicyReport::from_totals(
        tally.reward / n,
        tally.delivered as f64 / n,
        tally.dropped as f64 / n,
        tally.failed as f64 / n,
        tally.bits / n,
        chan.block_length as f64,
    );
    Ok(SimReport {
        blocks: measured,
        avg_reward_per_block: exact.avg_reward_per_block,
        per_message_distortion: exact.per_message_distortion,
        delivery_rate: exact.delivery_rate,
        deadline_violation_rate: exact.deadline_violation_rate,
        arq_failure_rate: exact.arq_failure_rate,
        throughput_eta: exact.throughput_eta,
        confidence_halfwidth: halfwidth,
        mean_queue_length: tally.queue as f64 / n,
        arrival_rate: tally.arrived as f64 / n,
        mean_sojourn_blocks: if tally.departures > 0 {
            tally.sojourn as f64 / tally.departures as f64
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_mdp, ArqConfig, DecodeModel};
    use crate::{ChannelConfig, SourceConfig};

    fn model(lambda: f64, deadline: u32) -> MdpModel {
        let cfg = ArqConfig {
            arrival_prob: lambda,
            deadline,
            max_window: 2,
            allowed_r: vec![1.0, 2.0],
            ..ArqConfig::new(deadline)
        };
        build_mdp(&cfg, &ChannelConfig::new(2, 2, 1, 10.0).unwrap(), &SourceConfig::new(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn no_arrivals_all_zero() {
        let m = model(0.0, 3);
        let r = run(&m, &Policy::uniform(&m), &SimConfig::new(10_000, 100, 1)).unwrap();
        assert_eq!(r.avg_reward_per_block, 0.0);
        assert_eq!(r.delivery_rate, 0.0);
        assert_eq!(r.deadline_violation_rate, 0.0);
        assert_eq!(r.throughput_eta, 0.0);
    }

    #[test]
    fn perfect_channel_delivers_everything() {
        let cfg = ArqConfig {
            arrival_prob: 0.5,
            deadline: 6,
            max_window: 1,
            allowed_r: vec![1.0],
            ..ArqConfig::new(6)
        };
        let m = MdpModel::with_decode(
            &cfg,
            &ChannelConfig::new(1, 1, 1, 10.0).unwrap(),
            &SourceConfig::new(1.0, 1.0).unwrap(),
            DecodeModel::perfect(1, 1),
        )
        .unwrap();
        let r = run(&m, &Policy::fixed(&m, 0, 1).unwrap(), &SimConfig::new(50_000, 10, 3)).unwrap();
        assert_eq!(r.delivery_rate, 1.0);
        assert_eq!(r.deadline_violation_rate, 0.0);
    }

    #[test]
    fn same_seed_same_report() {
        let m = model(0.6, 3);
        let p = Policy::uniform(&m);
        let a = run(&m, &p, &SimConfig::new(20_000, 100, 42)).unwrap();
        let b = run(&m, &p, &SimConfig::new(20_000, 100, 42)).unwrap();
        assert_eq!(a, b);
        let c = run(&m, &p, &SimConfig::new(20_000, 100, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trace_has_one_row_per_block() {
        let m = model(0.6, 3);
        let mut buf = Vec::new();
        run_traced(&m, &Policy::uniform(&m), &SimConfig::new(200, 10, 7), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("block,queue_len,head_age,round,event"));
        assert_eq!(lines.count(), 200);
    }

    #[test]
    fn undefined_policy_reported() {
        let m = model(0.9, 2);
        let dist = (0..m.num_states()).map(|x| if x == 0 { vec![(0, 1.0)] } else { Vec::new() }).collect();
        let p = Policy::from_distributions(&m, dist).unwrap();
        assert!(matches!(run(&m, &p, &SimConfig::new(1000, 0, 1)), Err(Error::PolicyUndefined(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(10, 10, 0).validate().is_err());
        assert!(SimConfig::new(20, 0, 0).validate().is_err());
        assert!(SimConfig::new(64, 0, 0).validate().is_ok());
    }
}
