use std::path::Path;

use dmdt_core::video::optimize_antennas;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, CsvDoc};

pub fn video(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let video = cfg
        .video
        .as_ref()
        .ok_or_else(|| CliError::Validation("the video command needs a [video] section".into()))?;
    let inputs = video.load()?;
    let snrs = cfg.sweep.snr_db.clone().unwrap_or_else(|| inputs.table.snr_points());
    let rate_of = |nu: u32| inputs.rates.iter().find(|r| r.0 == nu).map(|r| r.1);

    let mut doc = CsvDoc::new(
        &cfg.header_json(),
        &["snr_db", "n_u", "rate", "de", "dc", "total", "argmin"],
    );
    for snr_db in snrs {
        let sol = optimize_antennas(&inputs.model, &inputs.table, snr_db, rate_of)?;
        for c in &sol.candidates {
            doc.push(vec![
                num(snr_db),
                c.n_u.to_string(),
                num(c.rate),
                num(c.source_distortion),
                num(c.channel_distortion),
                num(c.total),
                u8::from(c.n_u == sol.best.n_u).to_string(),
            ]);
        }
        println!("video: {snr_db} dB: N_u* = {}, total = {}", sol.best.n_u, sol.best.total);
    }
    doc.write(&out.join("video.csv"))
}
