use std::path::Path;

use dmdt_core::exponent::{log2_distortion_terms, solve_finite_snr_with, solve_high_snr};
use dmdt_core::{ChannelConfig, SourceConfig, TradeoffCurve};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{num, CsvDoc};

/// `n` evenly spaced points on `[0, max]`, hitting both ends exactly.
fn grid(max: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| if n == 1 { 0.0 } else { max * (k as f64 / (n - 1) as f64) })
}

pub fn tradeoff(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let base = TradeoffCurve::new(&cfg.channel)?;
    let windows = cfg.sweep.windows.clone().unwrap_or_else(|| vec![1]);
    let widest = windows.iter().copied().max().unwrap_or(1) as f64 * base.max_multiplexing();
    let mut doc = CsvDoc::new(&cfg.header_json(), &["window", "r", "d_star", "kind"]);
    for &l in &windows {
        let curve = base.clone().with_arq_window(l)?;
        for r in grid(widest, cfg.sweep.r_points()).filter(|&r| r <= curve.max_rate()) {
            doc.push(vec![l.to_string(), num(r), num(curve.eval(r)?), "grid".into()]);
        }
        for &(x, d) in curve.vertices() {
            doc.push(vec![l.to_string(), num(x * l as f64), num(d), "vertex".into()]);
        }
    }
    doc.write(&out.join("tradeoff.csv"))?;
    println!("tradeoff: {} rows for windows {windows:?}", doc.rows.len());
    Ok(())
}

pub fn exponent(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let curve = TradeoffCurve::new(&cfg.channel)?;
    let slope = cfg.source.slope(&cfg.channel);
    let mut lines = CsvDoc::new(&cfg.header_json(), &["r", "source_exponent", "channel_exponent"]);
    for r in grid(curve.max_rate(), cfg.sweep.r_points()) {
        lines.push(vec![num(r), num(slope * r), num(curve.eval(r)?)]);
    }

    let dims = cfg.sweep.source_dims.clone().unwrap_or_else(|| vec![cfg.source.source_dim]);
    let mut summary = CsvDoc::new(
        &cfg.header_json(),
        &[
            "norm_order",
            "source_dim",
            "block_length",
            "slope",
            "r_star",
            "d_star",
            "distortion_exponent",
            "segment",
        ],
    );
    for k in dims {
        let src = SourceConfig {
            source_dim: k,
            ..cfg.source
        };
        let sol = solve_high_snr(&curve, &src, &cfg.channel)?;
        println!("exponent: k_src = {k}: r* = {}, d*(r*) = {}", sol.r_star, sol.d_star);
        summary.push(vec![
            num(src.norm_order),
            num(k),
            cfg.channel.block_length.to_string(),
            num(src.slope(&cfg.channel)),
            num(sol.r_star),
            num(sol.d_star),
            num(sol.distortion_exponent),
            sol.segment_index.to_string(),
        ]);
    }
    lines.write(&out.join("exponent.csv"))?;
    summary.write(&out.join("exponent_summary.csv"))?;
    Ok(())
}

pub fn finite_snr(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let curve = TradeoffCurve::new(&cfg.channel)?;
    let snrs = cfg.sweep.snr_db.clone().unwrap_or_else(|| vec![cfg.channel.snr_db]);
    let header = cfg.header_json();
    let mut values = CsvDoc::new(
        &header,
        &["snr_db", "r", "log2_objective", "objective", "source_term", "channel_term"],
    );
    let mut argmins = CsvDoc::new(
        &header,
        &["snr_db", "r_star", "log2_objective", "objective", "high_snr_r_star"],
    );
    for snr_db in snrs {
        let chan = ChannelConfig { snr_db, ..cfg.channel };
        let sol = solve_finite_snr_with(&curve, &cfg.source, &chan, cfg.terms)?;
        for r in grid(curve.max_rate(), cfg.sweep.r_points()) {
            let (ls, lc) = log2_distortion_terms(r, &curve, &cfg.source, &chan, cfg.terms)?;
            let hi = ls.max(lc);
            let total = hi + ((ls - hi).exp2() + (lc - hi).exp2()).log2();
            values.push(vec![num(snr_db), num(r), num(total), num(total.exp2()), num(ls.exp2()), num(lc.exp2())]);
        }
        let high = solve_high_snr(&curve, &cfg.source, &chan)?;
        println!("finite-snr: {snr_db} dB: r* = {} (high-SNR r* = {})", sol.r_star, high.r_star);
        argmins.push(vec![
            num(snr_db),
            num(sol.r_star),
            num(sol.log2_objective),
            num(sol.objective),
            num(high.r_star),
        ]);
    }
    values.write(&out.join("finite_snr.csv"))?;
    argmins.write(&out.join("finite_snr_argmin.csv"))?;
    Ok(())
}
