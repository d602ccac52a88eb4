//! On-disk corpus layout: one canonical CSV log per packet plus a JSON
//! sidecar of the same stem, e.g. `d1_speed-2_003.csv` / `d1_speed-2_003.json`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datamodel::{parse_log, trim_packet, validate_packet, write_log, FlightPacket, PacketMeta};
use crate::error::{Error, Result};

/// Seconds cut from both ends of untrimmed logs when loading.
pub const DEFAULT_TRIM_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub trim_seconds: f64,
    /// Reject packets that fail validation instead of only logging them.
    pub strict: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            trim_seconds: DEFAULT_TRIM_SECONDS,
            strict: true,
        }
    }
}

fn stem(packet: &FlightPacket, index: usize) -> String {
    format!("d{}_{}_{index:03}", packet.drone_id, packet.condition.tag())
}

/// Writes every packet into `dir`, creating it if needed. Packets sharing a
/// drone and condition are numbered in slice order.
pub fn write_corpus(dir: &Path, packets: &[FlightPacket]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut seen = std::collections::HashMap::new();
    let mut written = Vec::with_capacity(packets.len());
    for p in packets {
        let n = seen.entry((p.drone_id, p.condition)).or_insert(0usize);
        let base = dir.join(stem(p, *n));
        *n += 1;
        let csv = base.with_extension("csv");
        fs::write(&csv, write_log(p)).map_err(|e| Error::io(&csv, e))?;
        let meta = base.with_extension("json");
        let text = serde_json::to_string_pretty(&p.meta())?;
        fs::write(&meta, text + "\n").map_err(|e| Error::io(&meta, e))?;
        written.push(csv);
    }
    Ok(written)
}

fn load_one(meta_path: &Path, options: &LoadOptions) -> Result<Option<FlightPacket>> {
    let text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta: PacketMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", meta_path.display())))?;
    if meta.deviation_flag {
        log::info!("skipping {}: flagged as drifted during collection", meta_path.display());
        return Ok(None);
    }
    let csv_path = meta_path.with_extension("csv");
    let log_text = fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut packet = parse_log(&log_text, meta.drone_id, meta.condition)
        .map_err(|e| Error::Data(format!("{}: {e}", csv_path.display())))?;
    packet.sample_rate_hz = meta.sample_rate_hz;
    if meta.trimmed {
        packet.trimmed = true;
    } else {
        packet = trim_packet(packet, options.trim_seconds)?;
    }
    let report = validate_packet(&packet);
    if !report.is_valid() {
        let msg = format!("{}: {} violations, first {:?}", csv_path.display(), report.violations.len(), report.violations[0]);
        if options.strict {
            return Err(Error::Data(msg));
        }
        log::warn!("{msg}");
    }
    Ok(Some(packet))
}

/// Loads every packet of a corpus directory in file-name order.
pub fn load_corpus(dir: &Path, options: &LoadOptions) -> Result<Vec<FlightPacket>> {
    let mut metas: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    metas.sort();
    let loaded: Vec<Option<FlightPacket>> = metas.par_iter().map(|m| load_one(m, options)).collect::<Result<_>>()?;
    let packets: Vec<FlightPacket> = loaded.into_iter().flatten().collect();
    log::info!("loaded {} packets from {}", packets.len(), dir.display());
    Ok(packets)
}
