use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{OracleConfig, Prepared};
use super::run::{run_oracle, DiodeChange, RunOutput};
use crate::analysis::Waveform;
use crate::circuit::SwitchConfig;
use crate::Result;

/// Bumped whenever the oracle's numerics or file layout change.
const CACHE_FORMAT: u32 = 2;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    mode_history: Vec<(f64, u64, u64)>,
    diode_changes: Vec<DiodeChange>,
    active_events: usize,
    frozen_cycles: u64,
}

/// Hex SHA-256 of everything the oracle trajectory depends on.
pub fn oracle_key(p: &Prepared, cfg: &OracleConfig) -> String {
    let s = &p.scenario;
    let doc = serde_json::json!({
        "format": CACHE_FORMAT,
        "netlist": s.netlist,
        "control": s.control,
        "duration": s.duration,
        "h": cfg.h,
        "record_every": cfg.record_every,
    });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

fn paths(dir: &Path, key: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("oracle-{key}.csv")),
        dir.join(format!("oracle-{key}.json")),
    )
}

fn load(p: &Prepared, dir: &Path, key: &str) -> Option<RunOutput> {
    let (csv, side) = paths(dir, key);
    let waveform = Waveform::read_csv(BufReader::new(fs::File::open(csv).ok()?)).ok()?;
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(fs::File::open(side).ok()?)).ok()?;
    let (ng, nd) = (p.netlist.n_gates(), p.netlist.n_diodes());
    let mode_history = sidecar
        .mode_history
        .iter()
        .map(|&(t, g, d)| {
            let mut cfg = SwitchConfig::new(ng, nd);
            (0..ng).for_each(|i| cfg.set_gate(i, g >> i & 1 == 1));
            (0..nd).for_each(|i| cfg.set_diode(i, d >> i & 1 == 1));
            (t, cfg)
        })
        .collect();
    Some(RunOutput {
        id: "oracle".into(),
        waveform,
        mode_history,
        diode_changes: sidecar.diode_changes,
        active_events: sidecar.active_events,
        frozen_cycles: sidecar.frozen_cycles,
        report: None,
        session: None,
        crossings: Vec::new(),
    })
}

fn store(dir: &Path, key: &str, run: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (csv, side) = paths(dir, key);
    let tmp = csv.with_extension("csv.partial");
    run.waveform.write_csv(BufWriter::new(fs::File::create(&tmp)?))?;
    fs::rename(&tmp, csv)?;
    let sidecar = Sidecar {
        mode_history: run
            .mode_history
            .iter()
            .map(|(t, c)| (*t, c.gate_bits(), c.diode_bits()))
            .collect(),
        diode_changes: run.diode_changes.clone(),
        active_events: run.active_events,
        frozen_cycles: run.frozen_cycles,
    };
    fs::write(side, serde_json::to_vec(&sidecar)?)?;
    Ok(())
}

/// Oracle run restored from `dir` when present, computed and stored otherwise.
/// The flag is true on a cache hit.
pub fn cached_oracle(p: &Prepared, cfg: &OracleConfig, dir: &Path) -> Result<(RunOutput, bool)> {
    let key = oracle_key(p, cfg);
    if let Some(hit) = load(p, dir, &key) {
        return Ok((hit, true));
    }
    let run = run_oracle(p, cfg)?;
    store(dir, &key, &run)?;
    Ok((run, false))
}
