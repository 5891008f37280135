//! The optimal diversity-multiplexing tradeoff curve of an M x N Rayleigh
//! channel and its ARQ-extended form.
//!
//! For block lengths `T >= M + N - 1` the optimal diversity at multiplexing
//! gain `r` is the piecewise-linear curve through `(i, (M - i)(N - i))`,
//! `i = 0..=min(M, N)`. An ARQ protocol with window `L` under the long-term
//! static model achieves `d*(r, L) = d*(r / L)`, so the same vertex list
//! serves both after rescaling the abscissa by `L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub tx_antennas: u32,
    pub rx_antennas: u32,
    /// Symbols per round.
    pub block_length: u32,
    pub snr_db: f64,
}

impl ChannelConfig {
    pub fn new(tx_antennas: u32, rx_antennas: u32, block_length: u32, snr_db: f64) -> Result<Self> {
        let cfg = ChannelConfig {
            tx_antennas,
            rx_antennas,
            block_length,
            snr_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return Err(Error::config("antenna counts must be at least 1"));
        }
        if self.block_length == 0 {
            return Err(Error::config("block length must be at least 1"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db must be finite"));
        }
        Ok(())
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// `log2(SNR)`, computed from the dB value to avoid overflow at very high SNR.
    pub fn log2_snr(&self) -> f64 {
        self.snr_db / 10.0 * std::f64::consts::LOG2_10
    }

    pub fn min_antennas(&self) -> u32 {
        self.tx_antennas.min(self.rx_antennas)
    }

    /// Whether the curve is the exact optimal tradeoff (`T >= M + N - 1`).
    pub fn is_tight(&self) -> bool {
        self.block_length + 1 >= self.tx_antennas + self.rx_antennas
    }
}

/// One linear piece of a [`TradeoffCurve`] in the (possibly ARQ-scaled) `r` domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub r0: f64,
    pub r1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl Segment {
    pub fn slope(&self) -> f64 {
        (self.d1 - self.d0) / (self.r1 - self.r0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    vertices: Vec<(f64, f64)>,
    arq_window: u32,
}

/// Build the `L = 1` curve for a channel.
pub fn build_curve(cfg: &ChannelConfig) -> Result<TradeoffCurve> {
    TradeoffCurve::new(cfg)
}

impl TradeoffCurve {
    pub fn new(cfg: &ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        Self::from_antennas(cfg.tx_antennas, cfg.rx_antennas)
    }

    pub fn from_antennas(m: u32, n: u32) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::config("antenna counts must be at least 1"));
        }
        let vertices = (0..=m.min(n))
            .map(|i| (i as f64, ((m - i) as u64 * (n - i) as u64) as f64))
            .collect();
        Ok(TradeoffCurve {
            vertices,
            arq_window: 1,
        })
    }

    /// The same curve evaluated as `d*(r / window)`.
    pub fn with_arq_window(mut self, window: u32) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("ARQ window must be at least 1"));
        }
        self.arq_window = window;
        Ok(self)
    }

    /// Vertices of the unscaled curve `d*(r)`.
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn arq_window(&self) -> u32 {
        self.arq_window
    }

    /// `min(M, N)`.
    pub fn max_multiplexing(&self) -> f64 {
        self.vertices.last().map(|v| v.0).unwrap_or(0.0)
    }

    /// Right end of the evaluation domain, `L * min(M, N)`.
    pub fn max_rate(&self) -> f64 {
        self.arq_window as f64 * self.max_multiplexing()
    }

    /// `d*(0) = MN`.
    pub fn full_diversity(&self) -> f64 {
        self.vertices[0].1
    }

    /// Linear pieces in the scaled domain `[0, L * min(M, N)]`.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let scale = self.arq_window as f64;
        self.vertices.windows(2).enumerate().map(move |(index, w)| Segment {
            index,
            r0: w[0].0 * scale,
            r1: w[1].0 * scale,
            d0: w[0].1,
            d1: w[1].1,
        })
    }

    /// `d*(r / L)`. Out-of-domain `r` is an error, never clamped.
    pub fn eval(&self, r: f64) -> Result<f64> {
        let max = self.max_rate();
        if !(0.0..=max).contains(&r) {
            return Err(Error::OutOfDomain { r, max });
        }
        let x = r / self.arq_window as f64;
        let last = self.vertices.len() - 1;
        if last == 0 {
            return Ok(self.vertices[0].1);
        }
        let i = (x.floor() as usize).min(last - 1);
        let (x0, d0) = self.vertices[i];
        let (x1, d1) = self.vertices[i + 1];
        if x == x0 {
            return Ok(d0);
        }
        if x == x1 {
            return Ok(d1);
        }
        Ok(d0 + (d1 - d0) * (x - x0))
    }

    /// Short-term static channel exponent `L * d*(r / L)`.
    pub fn short_term_exponent(&self, r: f64) -> Result<f64> {
        Ok(self.arq_window as f64 * self.eval(r)?)
    }

    /// Index of the segment containing `r` (the left one at interior vertices).
    pub fn segment_of(&self, r: f64) -> Result<usize> {
        let max = self.max_rate();
        if !(0.0..=max).contains(&r) {
            return Err(Error::OutOfDomain { r, max });
        }
        let x = r / self.arq_window as f64;
        let pieces = self.vertices.len().saturating_sub(1).max(1);
        let i = x.ceil() as usize;
        Ok(i.saturating_sub(1).min(pieces - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(m: u32, n: u32, l: u32) -> TradeoffCurve {
        TradeoffCurve::from_antennas(m, n)
            .unwrap()
            .with_arq_window(l)
            .unwrap()
    }

    #[test]
    fn vertices_4x4() {
        let c = curve(4, 4, 1);
        assert_eq!(
            c.vertices(),
            &[(0.0, 16.0), (1.0, 9.0), (2.0, 4.0), (3.0, 1.0), (4.0, 0.0)]
        );
    }

    #[test]
    fn vertices_small() {
        assert_eq!(curve(1, 1, 1).vertices(), &[(0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(curve(2, 3, 1).vertices(), &[(0.0, 6.0), (1.0, 2.0), (2.0, 0.0)]);
    }

    #[test]
    fn rejects_zero_antennas() {
        assert!(TradeoffCurve::from_antennas(0, 3).is_err());
        assert!(ChannelConfig::new(2, 0, 4, 10.0).is_err());
        assert!(ChannelConfig::new(2, 2, 0, 10.0).is_err());
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(curve(2, 2, 1).eval(0.5).unwrap(), 2.5);
        assert_eq!(curve(2, 2, 2).eval(1.0).unwrap(), 2.5);
        assert_eq!(curve(4, 4, 1).eval(0.0).unwrap(), 16.0);
        assert_eq!(curve(2, 2, 2).eval(4.0).unwrap(), 0.0);
    }

    #[test]
    fn short_term() {
        assert_eq!(curve(2, 2, 2).short_term_exponent(1.0).unwrap(), 5.0);
        assert_eq!(curve(2, 2, 2).short_term_exponent(0.0).unwrap(), 8.0);
        let c = curve(3, 2, 1);
        assert_eq!(c.short_term_exponent(0.7).unwrap(), c.eval(0.7).unwrap());
    }

    #[test]
    fn out_of_domain_is_error() {
        let c = curve(2, 2, 1);
        assert!(matches!(c.eval(-1e-9), Err(Error::OutOfDomain { .. })));
        assert!(matches!(c.eval(2.0 + 1e-9), Err(Error::OutOfDomain { .. })));
        assert!(c.eval(f64::NAN).is_err());
        assert!(curve(2, 2, 3).eval(6.0).is_ok());
    }

    #[test]
    fn tight_flag() {
        assert!(ChannelConfig::new(2, 2, 3, 0.0).unwrap().is_tight());
        assert!(!ChannelConfig::new(2, 2, 2, 0.0).unwrap().is_tight());
        assert!(ChannelConfig::new(1, 1, 1, 0.0).unwrap().is_tight());
    }

    #[test]
    fn segment_lookup() {
        let c = curve(4, 4, 2);
        assert_eq!(c.segment_of(0.0).unwrap(), 0);
        assert_eq!(c.segment_of(2.0).unwrap(), 0);
        assert_eq!(c.segment_of(2.5).unwrap(), 1);
        assert_eq!(c.segment_of(8.0).unwrap(), 3);
    }

    proptest! {
        #[test]
        fn exact_at_scaled_integers(m in 1u32..=8, n in 1u32..=8, l in 1u32..=6) {
            let c = curve(m, n, l);
            for i in 0..=m.min(n) {
                let d = c.eval((i * l) as f64).unwrap();
                prop_assert_eq!(d, ((m - i) * (n - i)) as f64);
            }
        }

        #[test]
        fn strictly_decreasing_and_convex(m in 1u32..=8, n in 1u32..=8, l in 1u32..=4,
                                          a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0) {
            let c = curve(m, n, l);
            let max = c.max_rate();
            let (r1, r3) = if a < b { (a * max, b * max) } else { (b * max, a * max) };
            prop_assume!(r3 - r1 > 1e-9);
            prop_assert!(c.eval(r1).unwrap() > c.eval(r3).unwrap());
            let r2 = r1 + t * (r3 - r1);
            let chord = c.eval(r1).unwrap() + t * (c.eval(r3).unwrap() - c.eval(r1).unwrap());
            prop_assert!(c.eval(r2).unwrap() <= chord + 1e-9);
            let slopes: Vec<f64> = c.segments().map(|s| s.slope()).collect();
            prop_assert!(slopes.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn arq_window_never_reduces_diversity(m in 1u32..=6, n in 1u32..=6,
                                              l1 in 1u32..=4, extra in 1u32..=4, u in 0.0f64..1.0) {
            let small = curve(m, n, l1);
            let big = curve(m, n, l1 + extra);
            let r = u * small.max_rate();
            prop_assert!(big.eval(r).unwrap() >= small.eval(r).unwrap());
        }
    }
}
