use std::path::{Path, PathBuf};

use dmdt_core::mdp::ArqConfig;
use dmdt_core::sim::SimConfig;
use dmdt_core::video::{CodeErrorTable, RateDistortion, VideoSourceModel};
use dmdt_core::{ChannelConfig, SourceConfig, TermConstants};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything a command may need. Every section has defaults, so an empty
/// file (or no file) runs the 4x4, 10 dB, `k_dl = 4` setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub channel: ChannelConfig,
    pub source: SourceConfig,
    pub terms: TermConstants,
    pub arq: ArqConfig,
    pub video: Option<VideoConfig>,
    pub sweep: SweepConfig,
    pub sim: SimSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            channel: ChannelConfig {
                tx_antennas: 4,
                rx_antennas: 4,
                block_length: 1,
                snr_db: 10.0,
            },
            source: SourceConfig {
                norm_order: 2.0,
                source_dim: 2.0,
            },
            terms: TermConstants::default(),
            arq: ArqConfig::new(4),
            video: None,
            sweep: SweepConfig::default(),
            sim: SimSection::default(),
        }
    }
}

/// Sweep ranges. An absent list means "the base config only"; an explicit
/// empty list means an empty sweep.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Grid points on the multiplexing axis.
    pub r_points: Option<usize>,
    /// ARQ windows for the tradeoff curves.
    pub windows: Option<Vec<u32>>,
    /// Source dimensions for the exponent summary.
    pub source_dims: Option<Vec<f64>>,
    pub snr_db: Option<Vec<f64>>,
    pub deadlines: Option<Vec<u32>>,
}

pub const DEFAULT_R_POINTS: usize = 101;

impl SweepConfig {
    pub fn r_points(&self) -> usize {
        self.r_points.unwrap_or(DEFAULT_R_POINTS)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    /// `nu,snr_db,pe` table.
    pub pe_table: PathBuf,
    /// `rate_bits,de` table; alternative to `rd_model`.
    pub rd_table: Option<PathBuf>,
    pub rd_model: Option<HyperbolicRd>,
    /// Multiplexing levels to consider; every level in the table by default.
    pub levels: Option<Vec<u32>>,
    /// Code rate for each entry of `levels` (or each table level), in bits.
    pub rates: Vec<f64>,
}

fn default_beta() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperbolicRd {
    pub d0: f64,
    pub theta: f64,
    pub r0: f64,
}

/// Loaded video inputs.
pub struct VideoInputs {
    pub model: VideoSourceModel,
    pub table: CodeErrorTable,
    pub rates: Vec<(u32, f64)>,
}

impl VideoConfig {
    pub fn load(&self) -> CliResult<VideoInputs> {
        let rate_distortion = match (&self.rd_table, self.rd_model) {
            (Some(path), None) => RateDistortion::from_csv(open(path)?)?,
            (None, Some(h)) => RateDistortion::hyperbolic(h.d0, h.theta, h.r0)?,
            _ => return Err(CliError::Validation("video needs exactly one of rd_table and rd_model".into())),
        };
        let model = VideoSourceModel {
            beta: self.beta,
            gamma: self.gamma,
            sigma2: self.sigma2,
            rate_distortion,
        };
        model.validate()?;
        let mut table = CodeErrorTable::from_csv(open(&self.pe_table)?)?;
        if let Some(levels) = &self.levels {
            table = table.with_allowed(levels)?;
        }
        let levels = table.allowed().to_vec();
        if self.rates.len() != levels.len() {
            return Err(CliError::Validation(format!(
                "video.rates has {} entries for {} multiplexing levels",
                self.rates.len(),
                levels.len()
            )));
        }
        let rates = levels.into_iter().zip(self.rates.iter().copied()).collect();
        Ok(VideoInputs { model, table, rates })
    }
}

fn open(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub horizon_blocks: u64,
    pub warmup_blocks: u64,
    pub batches: usize,
    pub seed: u64,
    pub policy: PolicyChoice,
    /// Also write the per-round trace.
    pub trace: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            horizon_blocks: 1_000_000,
            warmup_blocks: 10_000,
            batches: dmdt_core::sim::DEFAULT_BATCHES,
            seed: 0,
            policy: PolicyChoice::Optimal,
            trace: false,
        }
    }
}

impl SimSection {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            horizon_blocks: self.horizon_blocks,
            warmup_blocks: self.warmup_blocks,
            seed: self.seed,
            batches: self.batches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyChoice {
    /// Solve the LP and use its policy.
    Optimal,
    /// One `(r, L)` for every block.
    Fixed { r: f64, window: u32 },
    /// A policy file written by the `mdp` command.
    File { path: PathBuf },
}

impl RunConfig {
    /// Reads a TOML file; relative table paths are resolved against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(v) = &mut self.video {
            fix(&mut v.pe_table);
            if let Some(p) = &mut v.rd_table {
                fix(p);
            }
        }
        if let PolicyChoice::File { path } = &mut self.sim.policy {
            fix(path);
        }
    }

    /// Checks the sections every command depends on.
    pub fn validate(&self) -> CliResult<()> {
        self.channel.validate()?;
        self.source.validate()?;
        let t = self.terms;
        if !(t.source > 0.0 && t.channel > 0.0 && t.source.is_finite() && t.channel.is_finite()) {
            return Err(CliError::Validation("term constants must be positive and finite".into()));
        }
        if let Some(w) = &self.sweep.windows {
            if w.contains(&0) {
                return Err(CliError::Validation("sweep.windows entries must be at least 1".into()));
            }
        }
        if let Some(ks) = &self.sweep.source_dims {
            if ks.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                return Err(CliError::Validation("sweep.source_dims entries must be positive".into()));
            }
        }
        if let Some(s) = &self.sweep.snr_db {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Validation("sweep.snr_db entries must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn deadlines(&self) -> Vec<u32> {
        self.sweep.deadlines.clone().unwrap_or_else(|| vec![self.arq.deadline])
    }

    pub fn arq_for(&self, deadline: u32) -> ArqConfig {
        ArqConfig {
            deadline,
            ..self.arq.clone()
        }
    }

    /// One-line JSON recorded at the top of every output file.
    pub fn header_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.channel.tx_antennas, 4);
        assert_eq!(cfg.arq.deadline, 4);
        assert_eq!(cfg.deadlines(), vec![4]);
        assert_eq!(cfg.sim.policy, PolicyChoice::Optimal);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[channel]\ntx_antenas = 2\n").is_err());
        assert!(toml::from_str::<RunConfig>("colour = 1\n").is_err());
        assert!(toml::from_str::<RunConfig>("[sweep]\nwindow = [1]\n").is_err());
    }

    #[test]
    fn partial_sections_need_required_fields() {
        // a channel table replaces the default, so all four fields are needed
        assert!(toml::from_str::<RunConfig>("[channel]\ntx_antennas = 2\n").is_err());
        let cfg: RunConfig =
            toml::from_str("[channel]\ntx_antennas = 2\nrx_antennas = 3\nblock_length = 4\nsnr_db = 20\n").unwrap();
        assert_eq!(cfg.channel.rx_antennas, 3);
    }

    #[test]
    fn policy_choices_parse() {
        let cfg: RunConfig = toml::from_str("[sim]\npolicy = { fixed = { r = 2.0, window = 3 } }\n").unwrap();
        assert_eq!(cfg.sim.policy, PolicyChoice::Fixed { r: 2.0, window: 3 });
        let cfg: RunConfig = toml::from_str("[sim]\npolicy = \"optimal\"\nseed = 4\n").unwrap();
        assert_eq!(cfg.sim.seed, 4);
    }

    #[test]
    fn header_round_trips() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.header_json()).unwrap();
        assert_eq!(back.header_json(), cfg.header_json());
    }
}
