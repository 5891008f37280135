//! End-to-end distortion of a progressive video coder sent over a space-time
//! code that can trade multiplexing antennas for diversity.
//!
//! Total distortion is `D_e + D_c`: the encoder distortion at the code's rate
//! plus the channel-error distortion, which is proportional to the codeword
//! error probability of the chosen multiplexing level. Both the encoder
//! rate-distortion curve and the code's error curves are external data.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate to encoder distortion `D_e(R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateDistortion {
    /// Points `(rate_bits, de)` sorted by rate, interpolated linearly in `ln D_e`.
    Table(Vec<(f64, f64)>),
    /// `D_e(R) = d0 + theta / (R - r0)` for `R > r0`.
    Hyperbolic { d0: f64, theta: f64, r0: f64 },
}

#[derive(Debug, Deserialize)]
struct RdRow {
    rate_bits: f64,
    de: f64,
}

impl RateDistortion {
    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("rate-distortion table is empty"));
        }
        if points.iter().any(|&(r, d)| !r.is_finite() || !d.is_finite() || d < 0.0) {
            return Err(Error::config("rate-distortion table holds non-finite or negative values"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::config("rate-distortion table has duplicate rates"));
        }
        if points.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(Error::config("rate-distortion table must be non-increasing in rate"));
        }
        Ok(RateDistortion::Table(points))
    }

    pub fn hyperbolic(d0: f64, theta: f64, r0: f64) -> Result<Self> {
        if !(d0 >= 0.0 && theta > 0.0) || !r0.is_finite() || !d0.is_finite() || !theta.is_finite() {
            return Err(Error::config("hyperbolic R-D model needs d0 >= 0, theta > 0"));
        }
        Ok(RateDistortion::Hyperbolic { d0, theta, r0 })
    }

    /// Parses a `rate_bits,de` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["rate_bits", "de"] {
            return Err(Error::Parse(format!("expected header `rate_bits,de`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let row: RdRow = row?;
            points.push((row.rate_bits, row.de));
        }
        Self::table(points)
    }

    pub fn eval(&self, rate: f64) -> Result<f64> {
        match self {
            RateDistortion::Hyperbolic { d0, theta, r0 } => {
                if !(rate > *r0) {
                    return Err(Error::config(format!("rate {rate} not above the model pole {r0}")));
                }
                Ok(d0 + theta / (rate - r0))
            }
            RateDistortion::Table(points) => {
                let (lo, hi) = (points[0].0, points[points.len() - 1].0);
                if !(lo..=hi).contains(&rate) {
                    return Err(Error::TableCoverage(format!(
                        "rate {rate} outside rate-distortion table range [{lo}, {hi}]"
                    )));
                }
                Ok(interpolate(points, rate))
            }
        }
    }
}

/// Piecewise interpolation in `ln y`, falling back to linear where an end is zero.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points.partition_point(|p| p.0 < x);
    if i < points.len() && points[i].0 == x {
        return points[i].1;
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    let t = (x - x0) / (x1 - x0);
    if y0 > 0.0 && y1 > 0.0 {
        (y0.ln() + t * (y1.ln() - y0.ln())).exp()
    } else {
        y0 + t * (y1 - y0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSourceModel {
    pub beta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub rate_distortion: RateDistortion,
}

impl VideoSourceModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("sigma2", self.sigma2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive and finite")));
            }
        }
        if !(self.sensitivity() > 0.0) {
            return Err(Error::config(format!(
                "beta = {}, gamma = {} give a non-positive channel distortion factor",
                self.beta, self.gamma
            )));
        }
        Ok(())
    }

    /// Bracketed factor of the channel-distortion model; depends only on beta and gamma.
    pub fn sensitivity(&self) -> f64 {
        let (b, g) = (self.beta, self.gamma);
        (g + b) / g * (g / b).ln_1p() - 1.0 / g + 0.5
    }
}

/// `D_c = sigma^2 P_e [((gamma + beta) / gamma) ln(1 + gamma / beta) - 1/gamma + 1/2]`.
pub fn channel_distortion(model: &VideoSourceModel, p_e: f64) -> Result<f64> {
    model.validate()?;
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::config(format!("error probability {p_e} outside [0, 1]")));
    }
    Ok(model.sigma2 * p_e * model.sensitivity())
}

/// Codeword error probability per number of multiplexing antennas and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeErrorTable {
    curves: BTreeMap<u32, Vec<(f64, f64)>>,
    allowed: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PeRow {
    nu: u32,
    snr_db: f64,
    pe: f64,
}

impl CodeErrorTable {
    /// Builds a table from `(nu, snr_db, pe)` points, validating ranges and
    /// monotonicity. The allowed multiplexing levels are the `nu` values present.
    pub fn from_points(points: impl IntoIterator<Item = (u32, f64, f64)>) -> Result<Self> {
        let mut curves: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
        for (nu, snr, pe) in points {
            if nu == 0 {
                return Err(Error::config("multiplexing antenna count must be positive"));
            }
            if !snr.is_finite() {
                return Err(Error::config(format!("non-finite SNR for nu = {nu}")));
            }
            if !(0.0..=1.0).contains(&pe) {
                return Err(Error::config(format!("error probability {pe} outside [0, 1] at nu = {nu}, snr = {snr}")));
            }
            curves.entry(nu).or_default().push((snr, pe));
        }
        if curves.is_empty() {
            return Err(Error::config("error table is empty"));
        }
        for (nu, curve) in curves.iter_mut() {
            curve.sort_by(|a, b| a.0.total_cmp(&b.0));
            if curve.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::config(format!("duplicate SNR in error table for nu = {nu}")));
            }
            if curve.windows(2).any(|w| w[1].1 > w[0].1) {
                return Err(Error::config(format!("error probability must be non-increasing in SNR (nu = {nu})")));
            }
        }
        let table = CodeErrorTable {
            allowed: curves.keys().copied().collect(),
            curves,
        };
        table.check_antenna_monotonicity()?;
        Ok(table)
    }

    /// Parses the `nu,snr_db,pe` CSV format.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["nu", "snr_db", "pe"] {
            return Err(Error::Parse(format!(
                "expected header `nu,snr_db,pe`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let row: PeRow = row?;
            if row.snr_db.is_nan() || row.pe.is_nan() {
                return Err(Error::Parse("NaN in error table".into()));
            }
            points.push((row.nu, row.snr_db, row.pe));
        }
        Self::from_points(points)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (&nu, curve) in &self.curves {
            for &(snr_db, pe) in curve {
                w.serialize(PeRow { nu, snr_db, pe })?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Restricts the admissible multiplexing levels (default: every level in the table).
    pub fn with_allowed(mut self, allowed: &[u32]) -> Result<Self> {
        if allowed.is_empty() {
            return Err(Error::config("allowed multiplexing set is empty"));
        }
        for nu in allowed {
            if !self.curves.contains_key(nu) {
                return Err(Error::TableCoverage(format!("no error curve for nu = {nu}")));
            }
        }
        let mut allowed = allowed.to_vec();
        allowed.sort_unstable();
        allowed.dedup();
        self.allowed = allowed;
        Ok(self)
    }

    pub fn allowed(&self) -> &[u32] {
        &self.allowed
    }

    /// SNR range over which every allowed level is defined.
    pub fn snr_range(&self) -> (f64, f64) {
        self.allowed.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), nu| {
            let c = &self.curves[nu];
            (lo.max(c[0].0), hi.min(c[c.len() - 1].0))
        })
    }

    /// Distinct SNR points present for all allowed levels.
    pub fn snr_points(&self) -> Vec<f64> {
        let (lo, hi) = self.snr_range();
        let mut pts: Vec<f64> = self
            .allowed
            .iter()
            .flat_map(|nu| self.curves[nu].iter().map(|p| p.0))
            .filter(|s| (lo..=hi).contains(s))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `P_e(nu, snr_db)`: exact at table points, log-domain interpolation
    /// between them, never extrapolated.
    pub fn pe(&self, nu: u32, snr_db: f64) -> Result<f64> {
        let curve = self
            .curves
            .get(&nu)
            .ok_or_else(|| Error::TableCoverage(format!("no error curve for nu = {nu}")))?;
        let (lo, hi) = (curve[0].0, curve[curve.len() - 1].0);
        if !(lo..=hi).contains(&snr_db) {
            return Err(Error::TableCoverage(format!(
                "snr {snr_db} dB outside table range [{lo}, {hi}] for nu = {nu}"
            )));
        }
        Ok(interpolate(curve, snr_db))
    }

    fn check_antenna_monotonicity(&self) -> Result<()> {
        let levels: Vec<u32> = self.curves.keys().copied().collect();
        for pair in levels.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            for &(snr, pe_hi) in &self.curves[&hi] {
                if let Ok(pe_lo) = self.pe(lo, snr) {
                    if pe_lo > pe_hi * (1.0 + 1e-12) {
                        return Err(Error::config(format!(
                            "error probability must be non-decreasing in nu: P_e({lo}, {snr}) = {pe_lo} > P_e({hi}, {snr}) = {pe_hi}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntennaChoice {
    pub n_u: u32,
    pub rate: f64,
    pub source_distortion: f64,
    pub channel_distortion: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntennaSolution {
    pub best: AntennaChoice,
    /// Every evaluated level, in increasing `n_u`.
    pub candidates: Vec<AntennaChoice>,
}

/// Integer program `min_{N_u} D_e(rate(N_u)) + D_c(P_e(N_u, snr))` over the
/// table's allowed levels, by enumeration. Ties go to the smaller `N_u`.
pub fn optimize_antennas(
    model: &VideoSourceModel,
    table: &CodeErrorTable,
    snr_db: f64,
    rate_of: impl Fn(u32) -> Option<f64>,
) -> Result<AntennaSolution> {
    model.validate()?;
    let mut candidates = Vec::with_capacity(table.allowed().len());
    for &n_u in table.allowed() {
        let rate = rate_of(n_u).ok_or_else(|| Error::config(format!("no code rate given for N_u = {n_u}")))?;
        let p_e = table.pe(n_u, snr_db)?;
        let source_distortion = model.rate_distortion.eval(rate)?;
        let channel = channel_distortion(model, p_e)?;
        candidates.push(AntennaChoice {
            n_u,
            rate,
            source_distortion,
            channel_distortion: channel,
            total: source_distortion + channel,
        });
    }
    let best = candidates
        .iter()
        .copied()
        .reduce(|best, c| if c.total < best.total { c } else { best })
        .ok_or_else(|| Error::config("no allowed multiplexing levels"))?;
    Ok(AntennaSolution { best, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(rd: RateDistortion) -> VideoSourceModel {
        VideoSourceModel {
            beta: 0.01,
            gamma: 1.0,
            sigma2: 1.0,
            rate_distortion: rd,
        }
    }

    #[test]
    fn channel_distortion_values() {
        let m = model(RateDistortion::hyperbolic(0.0, 1.0, 0.0).unwrap());
        assert_eq!(channel_distortion(&m, 0.0).unwrap(), 0.0);
        // 0.1 * (1.01 ln 101 - 0.5), evaluated independently.
        let expected = 0.1 * (1.01 * 101f64.ln() - 0.5);
        assert_relative_eq!(channel_distortion(&m, 0.1).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.416_127_172_200_967_2, max_relative = 1e-14);
        let doubled = VideoSourceModel { sigma2: 2.0, ..m.clone() };
        assert_relative_eq!(
            channel_distortion(&doubled, 0.3).unwrap(),
            2.0 * channel_distortion(&m, 0.3).unwrap(),
            max_relative = 1e-15
        );
        assert!(channel_distortion(&VideoSourceModel { beta: 0.0, ..m.clone() }, 0.1).is_err());
        assert!(channel_distortion(&VideoSourceModel { gamma: 0.0, ..m.clone() }, 0.1).is_err());
        assert!(channel_distortion(&m, 1.5).is_err());
    }

    #[test]
    fn rd_table_interpolation() {
        let rd = RateDistortion::table(vec![(1.0, 100.0), (3.0, 1.0)]).unwrap();
        assert_eq!(rd.eval(1.0).unwrap(), 100.0);
        assert_relative_eq!(rd.eval(2.0).unwrap(), 10.0, max_relative = 1e-14);
        assert!(matches!(rd.eval(3.5), Err(Error::TableCoverage(_))));
        assert!(RateDistortion::table(vec![(1.0, 1.0), (2.0, 2.0)]).is_err());
    }

    #[test]
    fn rd_csv() {
        let rd = RateDistortion::from_csv("rate_bits,de\n1,10\n2,5\n".as_bytes()).unwrap();
        assert_eq!(rd.eval(2.0).unwrap(), 5.0);
        assert!(RateDistortion::from_csv("rate,de\n1,1\n".as_bytes()).is_err());
        assert!(RateDistortion::from_csv("rate_bits,de\n1,1\n2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn pe_table_parse_and_validate() {
        let csv = "nu,snr_db,pe\n1,0,0.1\n1,10,0.001\n2,0,0.3\n2,10,0.01\n";
        let t = CodeErrorTable::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.allowed(), &[1, 2]);
        assert_relative_eq!(t.pe(1, 5.0).unwrap(), 0.01, max_relative = 1e-12);
        assert!(matches!(t.pe(1, 12.0), Err(Error::TableCoverage(_))));
        assert!(matches!(t.pe(4, 5.0), Err(Error::TableCoverage(_))));
        let again = CodeErrorTable::from_csv(t.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(again, t);

        assert!(CodeErrorTable::from_csv("nu,snr_db,pe\n1,0,NaN\n".as_bytes()).is_err());
        assert!(CodeErrorTable::from_csv("nu,snr_db,pe\n1,0,1.5\n".as_bytes()).is_err());
        // increasing in SNR
        assert!(CodeErrorTable::from_csv("nu,snr_db,pe\n1,0,0.1\n1,10,0.2\n".as_bytes()).is_err());
        // decreasing in nu
        assert!(CodeErrorTable::from_csv("nu,snr_db,pe\n1,0,0.5\n2,0,0.1\n".as_bytes()).is_err());
        assert!(CodeErrorTable::from_csv("n,snr_db,pe\n1,0,0.5\n".as_bytes()).is_err());
    }

    fn synthetic_table() -> CodeErrorTable {
        let mut pts = Vec::new();
        for nu in [1u32, 2, 4, 8] {
            for snr in (0..=40).step_by(2) {
                let pe = (10f64.powf(-(snr as f64) * (8.0 / nu as f64) / 10.0 + 0.02 * nu as f64)).min(1.0);
                pts.push((nu, snr as f64, pe));
            }
        }
        CodeErrorTable::from_points(pts).unwrap()
    }

    #[test]
    fn degenerate_channel_picks_full_multiplexing() {
        let t = CodeErrorTable::from_points([1u32, 2, 4, 8].iter().flat_map(|&nu| [(nu, 0.0, 0.0), (nu, 10.0, 0.0)])).unwrap();
        let m = model(RateDistortion::hyperbolic(0.0, 1.0, 0.0).unwrap());
        let sol = optimize_antennas(&m, &t, 5.0, |nu| Some(nu as f64)).unwrap();
        assert_eq!(sol.best.n_u, 8);
    }

    #[test]
    fn degenerate_source_picks_fewest_antennas() {
        let m = model(RateDistortion::table(vec![(0.0, 1.0), (100.0, 1.0)]).unwrap());
        let sol = optimize_antennas(&m, &synthetic_table(), 10.0, |nu| Some(nu as f64)).unwrap();
        assert_eq!(sol.best.n_u, 1);
    }

    #[test]
    fn ties_go_to_smaller_level() {
        let t = CodeErrorTable::from_points([1u32, 2].iter().flat_map(|&nu| [(nu, 0.0, 0.0), (nu, 10.0, 0.0)])).unwrap();
        let m = model(RateDistortion::table(vec![(0.0, 1.0), (100.0, 1.0)]).unwrap());
        assert_eq!(optimize_antennas(&m, &t, 5.0, |nu| Some(nu as f64)).unwrap().best.n_u, 1);
    }

    #[test]
    fn missing_rate_or_coverage_is_error() {
        let m = model(RateDistortion::hyperbolic(0.0, 1.0, 0.0).unwrap());
        let t = synthetic_table();
        assert!(optimize_antennas(&m, &t, 10.0, |nu| (nu < 8).then_some(nu as f64)).is_err());
        assert!(matches!(
            optimize_antennas(&m, &t, 41.0, |nu| Some(nu as f64)),
            Err(Error::TableCoverage(_))
        ));
    }
}
