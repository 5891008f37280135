mod arq;
mod curves;
mod video;

pub use arq::{compare, mdp, simulate};
pub use curves::{exponent, finite_snr, tradeoff};
pub use video::video;
