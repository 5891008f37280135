//! Optimal operating points on the MIMO diversity-multiplexing(-delay)
//! tradeoff for end-to-end source distortion.
//!
//! - [`tradeoff`]: the piecewise-linear curve `d*(r)` and its ARQ form `d*(r/L)`.
//! - [`exponent`]: closed-form high-SNR and exact finite-SNR rate selection.
//! - [`video`]: integer program over multiplexing antennas for a video coder.
//! - [`mdp`]: average-reward MDP for delay-constrained traffic over MIMO-ARQ.
//! - [`lp`]: the revised simplex solver behind the MDP.
//! - [`sim`]: Monte-Carlo validation of MDP policies.

pub mod error;
pub mod exponent;
pub mod lp;
pub mod mdp;
pub mod sim;
pub mod tradeoff;
pub mod video;

pub use error::{Error, Result};
pub use exponent::{
    distortion_terms, no_delay_arq_procedure, solve_finite_snr, solve_finite_snr_with, solve_high_snr,
    ExponentSolution, FiniteSnrSolution, SourceConfig, TermConstants,
};
pub use tradeoff::{build_curve, ChannelConfig, TradeoffCurve};
