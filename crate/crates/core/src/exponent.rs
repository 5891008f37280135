//! Optimal multiplexing rate for a high-resolution vector quantizer cascaded
//! with a MIMO channel.
//!
//! The end-to-end distortion behaves like
//! `2^{-(pT/k) r log SNR} + 2^{-d*(r) log SNR}`: a source term that falls with
//! the rate and a channel term that grows with it. At asymptotically high SNR
//! the optimum balances the exponents, `d*(r*) = (pT/k) r*`; at finite SNR the
//! sum itself is minimized. Both are solved exactly per linear piece of the
//! tradeoff curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tradeoff::{ChannelConfig, Segment, TradeoffCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Distortion is the `p`-th power of the Euclidean error.
    pub norm_order: f64,
    /// Source vector dimension `k`.
    pub source_dim: f64,
}

impl SourceConfig {
    pub fn new(norm_order: f64, source_dim: f64) -> Result<Self> {
        let src = SourceConfig {
            norm_order,
            source_dim,
        };
        src.validate()?;
        Ok(src)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.norm_order > 0.0 && self.norm_order.is_finite()) {
            return Err(Error::config("norm order p must be positive and finite"));
        }
        if !(self.source_dim > 0.0 && self.source_dim.is_finite()) {
            return Err(Error::config("source dimension k must be positive and finite"));
        }
        Ok(())
    }

    /// Source exponent slope `pT / k`.
    pub fn slope(&self, cfg: &ChannelConfig) -> f64 {
        self.norm_order * cfg.block_length as f64 / self.source_dim
    }

    /// Quantizer bits `s = T r log2 SNR` matched to multiplexing gain `r`.
    pub fn bits_per_message(&self, cfg: &ChannelConfig, r: f64) -> f64 {
        cfg.block_length as f64 * r * cfg.log2_snr()
    }

    /// High-resolution quantizer distortion `2^{-p s / k}`.
    pub fn quantizer_distortion(&self, bits: f64) -> f64 {
        (-self.norm_order * bits / self.source_dim).exp2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentSolution {
    pub r_star: f64,
    pub d_star: f64,
    /// `-d*(r*)`.
    pub distortion_exponent: f64,
    pub segment_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteSnrSolution {
    pub r_star: f64,
    pub objective: f64,
    pub source_term: f64,
    pub channel_term: f64,
    /// `log2(objective)`; stays finite where `objective` underflows.
    pub log2_objective: f64,
}

/// Multiplicative constants in front of the two distortion terms.
///
/// `(1, 1)` drops the `O(1)` factors, which is accurate above roughly 20 dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConstants {
    pub source: f64,
    pub channel: f64,
}

impl Default for TermConstants {
    fn default() -> Self {
        TermConstants {
            source: 1.0,
            channel: 1.0,
        }
    }
}

impl TermConstants {
    fn validate(&self) -> Result<()> {
        if !(self.source > 0.0 && self.channel > 0.0)
            || !self.source.is_finite()
            || !self.channel.is_finite()
        {
            return Err(Error::config("term constants must be positive and finite"));
        }
        Ok(())
    }
}

fn check_inputs(curve: &TradeoffCurve, src: &SourceConfig, cfg: &ChannelConfig) -> Result<f64> {
    cfg.validate()?;
    src.validate()?;
    let m = cfg.min_antennas() as f64;
    if curve.max_multiplexing() != m || curve.full_diversity() != (cfg.tx_antennas * cfg.rx_antennas) as f64 {
        return Err(Error::config("tradeoff curve was not built from this channel"));
    }
    if !cfg.is_tight() {
        log::warn!(
            "T = {} < M + N - 1 = {}: the curve is an upper bound on the achievable tradeoff",
            cfg.block_length,
            cfg.tx_antennas + cfg.rx_antennas - 1
        );
    }
    let slope = src.slope(cfg);
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(Error::config("source exponent slope pT/k must be positive and finite"));
    }
    Ok(slope)
}

/// Closed-form high-SNR optimum: the crossing of `(pT/k) r` with `d*(r / L)`.
pub fn solve_high_snr(
    curve: &TradeoffCurve,
    src: &SourceConfig,
    cfg: &ChannelConfig,
) -> Result<ExponentSolution> {
    let slope = check_inputs(curve, src, cfg)?;
    for seg in curve.segments() {
        // d0 + s (r - r0) = slope * r
        let s = seg.slope();
        let r = (seg.d0 - s * seg.r0) / (slope - s);
        if r >= seg.r0 && r <= seg.r1 {
            let d = curve.eval(r)?;
            return Ok(ExponentSolution {
                r_star: r,
                d_star: d,
                distortion_exponent: -d,
                segment_index: seg.index,
            });
        }
    }
    // The line starts below MN and ends above 0, so some piece must cross it.
    Err(Error::Numerical(
        "no crossing between the source line and the tradeoff curve".into(),
    ))
}

fn log2_sum(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// `log2` of the source and channel terms at `r`.
pub fn log2_distortion_terms(
    r: f64,
    curve: &TradeoffCurve,
    src: &SourceConfig,
    cfg: &ChannelConfig,
    consts: TermConstants,
) -> Result<(f64, f64)> {
    let ell = cfg.log2_snr();
    let d = curve.eval(r)?;
    Ok((
        consts.source.log2() - src.slope(cfg) * r * ell,
        consts.channel.log2() - d * ell,
    ))
}

/// The two addends `2^{-(pT/k) r log SNR}` and `2^{-d*(r/L) log SNR}`.
pub fn distortion_terms(
    r: f64,
    curve: &TradeoffCurve,
    src: &SourceConfig,
    cfg: &ChannelConfig,
) -> Result<(f64, f64)> {
    let (a, b) = log2_distortion_terms(r, curve, src, cfg, TermConstants::default())?;
    Ok((a.exp2(), b.exp2()))
}

/// Finite-SNR optimum with unit term constants.
pub fn solve_finite_snr(
    curve: &TradeoffCurve,
    src: &SourceConfig,
    cfg: &ChannelConfig,
) -> Result<FiniteSnrSolution> {
    solve_finite_snr_with(curve, src, cfg, TermConstants::default())
}

/// Minimizes `c_s 2^{-(pT/k) r log SNR} + c_c 2^{-d*(r/L) log SNR}` over the
/// whole curve domain.
///
/// On each piece the objective is a sum of two exponentials of affine
/// functions, so its stationary point is closed form. The global minimum is
/// the best of the in-piece stationary points and all vertices. Comparison
/// happens in the log domain so nothing underflows at high SNR.
pub fn solve_finite_snr_with(
    curve: &TradeoffCurve,
    src: &SourceConfig,
    cfg: &ChannelConfig,
    consts: TermConstants,
) -> Result<FiniteSnrSolution> {
    let slope = check_inputs(curve, src, cfg)?;
    consts.validate()?;
    if cfg.snr_db <= 0.0 {
        return Err(Error::config("finite-SNR optimization needs SNR > 1 (0 dB)"));
    }
    let ell = cfg.log2_snr();

    let mut candidates: Vec<f64> = Vec::new();
    for seg in curve.segments() {
        candidates.push(seg.r0);
        if let Some(r) = stationary_point(&seg, slope, ell, consts) {
            candidates.push(r);
        }
    }
    candidates.push(curve.max_rate());

    let mut best: Option<(f64, f64, f64, f64)> = None;
    for r in candidates {
        let (ls, lc) = log2_distortion_terms(r, curve, src, cfg, consts)?;
        let total = log2_sum(ls, lc);
        match best {
            Some((br, bt, _, _)) if total > bt || (total == bt && r >= br) => {}
            _ => best = Some((r, total, ls, lc)),
        }
    }
    let (r_star, log2_objective, ls, lc) = best.expect("curve has at least one vertex");
    Ok(FiniteSnrSolution {
        r_star,
        objective: log2_objective.exp2(),
        source_term: ls.exp2(),
        channel_term: lc.exp2(),
        log2_objective,
    })
}

fn stationary_point(seg: &Segment, slope: f64, ell: f64, consts: TermConstants) -> Option<f64> {
    let s = seg.slope();
    if s >= 0.0 {
        return None;
    }
    // u(r) = log2 c_s - slope*ell*r ; v(r) = log2 c_c - (d0 + s (r - r0)) ell.
    // Stationary where 2^{u - v} = -s / slope.
    let k = consts.source.log2() - consts.channel.log2() + (seg.d0 - s * seg.r0) * ell;
    let r = ((-s / slope).log2() - k) / ((s - slope) * ell);
    (r > seg.r0 && r < seg.r1).then_some(r)
}

/// Optimization without a delay constraint when ARQ is available: use the
/// largest window, then balance exponents on `d*(r, L_max)`.
pub fn no_delay_arq_procedure(
    cfg: &ChannelConfig,
    src: &SourceConfig,
    max_window: u32,
) -> Result<ExponentSolution> {
    if max_window == 0 {
        return Err(Error::config("maximum ARQ window must be at least 1"));
    }
    let curve = TradeoffCurve::new(cfg)?.with_arq_window(max_window)?;
    solve_high_snr(&curve, src, cfg)
}
