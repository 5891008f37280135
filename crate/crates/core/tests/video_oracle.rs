mod common;

use dmdt_core::video::{channel_distortion, optimize_antennas, CodeErrorTable, RateDistortion, VideoSourceModel};
use proptest::prelude::*;
use rand::Rng;

const LEVELS: [u32; 4] = [1, 2, 4, 8];

/// Error curves that steepen with diversity: `P_e = min(1, c_nu 10^{-snr d_nu / 10})`
/// with `d_nu` falling in `nu`.
fn monotone_table(g: &mut impl Rng) -> CodeErrorTable {
    let mut pts = Vec::new();
    let base: f64 = g.random_range(0.01..0.2);
    for &nu in &LEVELS {
        let div = (9 - nu) as f64 / 2.0 + 1.0;
        let c = (base * nu as f64).min(1.0);
        for snr in (0..=40).step_by(4) {
            pts.push((nu, snr as f64, (c * 10f64.powf(-snr as f64 * div / 10.0)).min(1.0)));
        }
    }
    CodeErrorTable::from_points(pts).unwrap()
}

fn model(g: &mut impl Rng) -> VideoSourceModel {
    VideoSourceModel {
        beta: g.random_range(0.001..0.1),
        gamma: g.random_range(0.5..2.0),
        sigma2: g.random_range(1000.0..5000.0),
        rate_distortion: RateDistortion::hyperbolic(g.random_range(0.0..5.0), g.random_range(10.0..100.0), 0.0).unwrap(),
    }
}

/// Direct evaluation of the total distortion for one level.
fn total(m: &VideoSourceModel, t: &CodeErrorTable, nu: u32, snr: f64, rate: f64) -> f64 {
    let (b, g) = (m.beta, m.gamma);
    let bracket = (g + b) / g * (1.0 + g / b).ln() - 1.0 / g + 0.5;
    let de = match m.rate_distortion {
        RateDistortion::Hyperbolic { d0, theta, r0 } => d0 + theta / (rate - r0),
        _ => unreachable!(),
    };
    de + m.sigma2 * t.pe(nu, snr).unwrap() * bracket
}

#[test]
fn optimizer_equals_enumeration() {
    let mut g = common::rng(4);
    for _ in 0..50 {
        let m = model(&mut g);
        let t = monotone_table(&mut g);
        let rate_per = g.random_range(0.5..3.0);
        for snr in [0.0, 6.0, 13.5, 22.0, 31.0, 40.0] {
            let sol = optimize_antennas(&m, &t, snr, |nu| Some(rate_per * nu as f64)).unwrap();
            let mut best = (f64::INFINITY, 0);
            for &nu in &LEVELS {
                let v = total(&m, &t, nu, snr, rate_per * nu as f64);
                if v < best.0 {
                    best = (v, nu);
                }
            }
            assert_eq!(sol.best.n_u, best.1);
            assert!((sol.best.total - best.0).abs() <= 1e-12 * best.0);
        }
    }
}

#[test]
fn low_snr_prefers_diversity_high_snr_full_multiplexing() {
    let mut g = common::rng(6);
    for _ in 0..20 {
        let m = model(&mut g);
        let t = monotone_table(&mut g);
        let rate = |nu: u32| Some(nu as f64);
        let low = optimize_antennas(&m, &t, 0.0, rate).unwrap();
        let min_total = low.candidates.iter().map(|c| c.total).fold(f64::INFINITY, f64::min);
        assert_eq!(low.best.total, min_total);
        assert!(low.best.n_u < 8);
        assert_eq!(optimize_antennas(&m, &t, 40.0, rate).unwrap().best.n_u, 8);
    }
}

#[test]
fn level_non_decreasing_in_snr() {
    let mut g = common::rng(10);
    for _ in 0..20 {
        let m = model(&mut g);
        let t = monotone_table(&mut g);
        let mut prev = 0;
        for k in 0..=80 {
            let nu = optimize_antennas(&m, &t, k as f64 / 2.0, |nu| Some(nu as f64)).unwrap().best.n_u;
            assert!(nu >= prev);
            prev = nu;
        }
    }
}

#[test]
fn restricted_levels() {
    let mut g = common::rng(8);
    let m = model(&mut g);
    let t = monotone_table(&mut g).with_allowed(&[2, 4]).unwrap();
    let sol = optimize_antennas(&m, &t, 40.0, |nu| Some(nu as f64)).unwrap();
    assert_eq!(sol.best.n_u, 4);
    assert_eq!(sol.candidates.len(), 2);
}

proptest! {
    #[test]
    fn channel_distortion_linear_in_pe(beta in 0.001f64..1.0, gamma in 0.1f64..5.0, sigma2 in 0.1f64..1e4, pe in 0.0f64..=1.0) {
        let m = VideoSourceModel {
            beta, gamma, sigma2,
            rate_distortion: RateDistortion::hyperbolic(0.0, 1.0, 0.0).unwrap(),
        };
        if m.sensitivity() <= 0.0 {
            prop_assert!(channel_distortion(&m, pe).is_err());
            return Ok(());
        }
        let one = channel_distortion(&m, 1.0).unwrap();
        prop_assert!(one > 0.0);
        prop_assert!((channel_distortion(&m, pe).unwrap() - pe * one).abs() <= 1e-12 * one);
    }

    #[test]
    fn pe_interpolation_monotone(a in 0.0f64..40.0, b in 0.0f64..40.0, seed in 0u64..100) {
        let t = monotone_table(&mut common::rng(seed));
        let (lo, hi) = (a.min(b), a.max(b));
        for &nu in &LEVELS {
            prop_assert!(t.pe(nu, lo).unwrap() >= t.pe(nu, hi).unwrap());
        }
    }
}
