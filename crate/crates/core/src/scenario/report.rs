use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::cache::cached_oracle;
use super::config::Prepared;
use super::run::{run_es, run_oracle, run_sweep_sequential, RunOutput};
use crate::analysis::{
    blocked_spans, chattering_index, dcm_error_table, fft_spectrum, mean, relative_error, rms, DcmTable,
    Spectrum, Waveform,
};
use crate::events::{write_trace_csv, DurationSource, TraceNames};
use crate::{Error, Result};

type Table = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub rows: usize,
    pub diode_changes: usize,
    pub active_events: usize,
    pub frozen_cycles: u64,
    pub accepted_steps: Option<u64>,
    pub rejected_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatterSummary {
    pub intervals: usize,
    pub min_alternations: usize,
    pub max_alternations: usize,
    pub mean_alternations: f64,
    pub max_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub run: String,
    pub signal: String,
    pub file: String,
    pub peak_hz: f64,
    pub bin_width: f64,
    /// `[lo, hi, mean magnitude]` of each gap between harmonics.
    pub bands: Vec<[f64; 3]>,
    /// Largest band-mean ratio against the first listed run.
    pub max_band_ratio: Option<f64>,
}

/// Diode change times of the event-driven run paired with the oracle's.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationCheck {
    pub es_changes: usize,
    pub oracle_changes: usize,
    pub matched: usize,
    pub max_abs_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub window: [f64; 2],
    pub mean_window: [f64; 2],
    pub runs: BTreeMap<String, RunInfo>,
    pub rms: Table,
    pub mean: Table,
    /// Against the oracle.
    pub relative_error: Table,
    /// Relative error of each run over that of the event-driven run.
    pub error_ratio: Table,
    pub chattering: BTreeMap<String, ChatterSummary>,
    pub dcm: Option<DcmTable>,
    pub spectra: Vec<SpectrumSummary>,
    pub commutation: Option<CommutationCheck>,
}

/// Results of one scenario with every run kept in memory.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub summary: Summary,
    pub es: RunOutput,
    pub baselines: Vec<RunOutput>,
    pub oracle: Option<RunOutput>,
    pub spectra: Vec<(String, Spectrum)>,
}

impl ScenarioResult {
    pub fn run(&self, id: &str) -> Option<&RunOutput> {
        std::iter::once(&self.es)
            .chain(&self.baselines)
            .chain(&self.oracle)
            .find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's timing model with ideal (zero) solver durations.
    pub deterministic: bool,
    /// Where oracle trajectories are cached; `None` recomputes every time.
    pub cache_dir: Option<PathBuf>,
    /// Forces the baseline sweep onto the calling thread.
    pub sequential: bool,
}

fn info(run: &RunOutput) -> RunInfo {
    RunInfo {
        rows: run.waveform.len(),
        diode_changes: run.diode_changes.len(),
        active_events: run.active_events,
        frozen_cycles: run.frozen_cycles,
        accepted_steps: run.session.map(|s| s.integration.accepted),
        rejected_steps: run.session.map(|s| s.integration.rejected),
    }
}

fn shrink(spans: &[(f64, f64)], window: (f64, f64), margin: f64) -> Vec<(f64, f64)> {
    spans
        .iter()
        .map(|&(a, b)| (a.max(window.0) + margin, b.min(window.1) - margin))
        .filter(|(a, b)| a < b)
        .collect()
}

fn commutation(es: &RunOutput, oracle: &RunOutput, window: (f64, f64)) -> CommutationCheck {
    let inside = |c: &&(f64, usize, bool)| c.0 >= window.0 && c.0 <= window.1;
    let theirs: Vec<_> = oracle.diode_changes.iter().filter(inside).collect();
    let mut matched = 0;
    let mut max_abs_dt = 0.0f64;
    let ours: Vec<_> = es.diode_changes.iter().filter(inside).collect();
    for &&(t, d, on) in &ours {
        let best = theirs
            .iter()
            .filter(|c| c.1 == d && c.2 == on)
            .map(|c| (c.0 - t).abs())
            .fold(f64::INFINITY, f64::min);
        // Pairs further apart than a microsecond are different commutations.
        if best < 1e-6 {
            matched += 1;
            max_abs_dt = max_abs_dt.max(best);
        }
    }
    CommutationCheck {
        es_changes: ours.len(),
        oracle_changes: theirs.len(),
        matched,
        max_abs_dt,
    }
}

/// Computes every requested metric from finished runs.
pub fn summarize(
    p: &Prepared,
    es: &RunOutput,
    baselines: &[RunOutput],
    oracle: Option<&RunOutput>,
) -> Result<(Summary, Vec<(String, Spectrum)>)> {
    let s = &p.scenario;
    let m = &s.metrics;
    let window = s.window();
    let mean_window = s.mean_window();
    let tested: Vec<&RunOutput> = std::iter::once(es).chain(baselines).collect();
    let all: Vec<&RunOutput> = tested.iter().copied().chain(oracle).collect();

    let mut summary = Summary {
        scenario: s.id.clone(),
        window: [window.0, window.1],
        mean_window: [mean_window.0, mean_window.1],
        runs: all.iter().map(|r| (r.id.clone(), info(r))).collect(),
        rms: Table::new(),
        mean: Table::new(),
        relative_error: Table::new(),
        error_ratio: Table::new(),
        chattering: BTreeMap::new(),
        dcm: None,
        spectra: Vec::new(),
        commutation: None,
    };

    for r in &all {
        for sig in &m.signals {
            let v = rms(&r.waveform, sig, window)?;
            summary
                .rms
                .entry(r.id.clone())
                .or_default()
                .insert(sig.clone(), v);
        }
        for sig in &m.means {
            let v = mean(&r.waveform, sig, mean_window)?;
            summary
                .mean
                .entry(r.id.clone())
                .or_default()
                .insert(sig.clone(), v);
        }
    }

    if let Some(o) = oracle {
        for r in &tested {
            for sig in &m.signals {
                let e = relative_error(&r.waveform, &o.waveform, sig, window)?;
                summary
                    .relative_error
                    .entry(r.id.clone())
                    .or_default()
                    .insert(sig.clone(), e);
            }
        }
        let base = summary.relative_error.get("es").cloned().unwrap_or_default();
        for (id, errs) in &summary.relative_error {
            let ratios = errs
                .iter()
                .map(|(sig, e)| (sig.clone(), e / base.get(sig).copied().unwrap_or(f64::NAN)))
                .collect();
            summary.error_ratio.insert(id.clone(), ratios);
        }
        summary.commutation = Some(commutation(es, o, window));
    }

    let reference = oracle.unwrap_or(es);
    let spans = blocked_spans(&reference.mode_history, s.duration);
    if let Some(c) = &m.chatter {
        let intervals = shrink(&spans, window, c.margin);
        for r in &tested {
            let idx = chattering_index(&r.waveform, &c.signal, &intervals)?;
            let n = idx.per_interval.len();
            summary.chattering.insert(
                r.id.clone(),
                ChatterSummary {
                    intervals: n,
                    min_alternations: idx.per_interval.iter().map(|p| p.0).min().unwrap_or(0),
                    max_alternations: idx.per_interval.iter().map(|p| p.0).max().unwrap_or(0),
                    mean_alternations: if n == 0 {
                        0.0
                    } else {
                        idx.alternations as f64 / n as f64
                    },
                    max_amplitude: idx.max_amplitude,
                },
            );
        }
    }

    if let (Some(c), Some(o)) = (&m.dcm, oracle) {
        let mut times = Vec::new();
        for (a, b) in shrink(&spans, window, c.margin) {
            let k = c.per_span.max(1);
            times.extend((0..k).map(|j| a + (b - a) * (j as f64 + 0.5) / k as f64));
        }
        let runs: Vec<(&str, &Waveform)> = tested.iter().map(|r| (r.id.as_str(), &r.waveform)).collect();
        summary.dcm = Some(dcm_error_table(&runs, &o.waveform, &c.signal, &times, "es")?);
    }

    let mut spectra = Vec::new();
    for c in &m.spectra {
        let win = c.window.map_or(window, |[a, b]| (a, b));
        let mut first: Option<Vec<[f64; 3]>> = None;
        for id in &c.runs {
            let r = all
                .iter()
                .find(|r| &r.id == id)
                .ok_or_else(|| Error::Scenario(format!("spectrum of unknown run '{id}'")))?;
            let spec = fft_spectrum(&r.waveform, &c.signal, win, c.bins)?;
            let bands: Vec<[f64; 3]> = c.fundamental.map_or_else(Vec::new, |f0| {
                (0..c.harmonics)
                    .map(|k| {
                        let (lo, hi) = ((k as f64 + 0.25) * f0, (k as f64 + 0.75) * f0);
                        [lo, hi, spec.band_mean(lo, hi)]
                    })
                    .collect()
            });
            let max_band_ratio = first.as_ref().filter(|_| !bands.is_empty()).map(|reference| {
                bands
                    .iter()
                    .zip(reference)
                    .map(|(b, r)| b[2] / r[2])
                    .fold(0.0, f64::max)
            });
            if first.is_none() {
                first = Some(bands.clone());
            }
            let file = format!("spectrum_{id}_{}.csv", c.signal);
            summary.spectra.push(SpectrumSummary {
                run: id.clone(),
                signal: c.signal.clone(),
                file: file.clone(),
                peak_hz: spec.peak_frequency(),
                bin_width: spec.bin_width,
                bands,
                max_band_ratio,
            });
            spectra.push((file, spec));
        }
    }
    Ok((summary, spectra))
}

/// Runs the event-driven engine, the baseline sweep and the oracle, then
/// computes the scenario's metrics.
pub fn run_scenario(p: &Prepared, opts: &RunOptions) -> Result<ScenarioResult> {
    let durations = if opts.deterministic {
        DurationSource::Ideal
    } else {
        p.scenario.timing.source()
    };
    let oracle_run = || match (&p.scenario.oracle, &opts.cache_dir) {
        (None, _) => Ok(None),
        (Some(cfg), Some(dir)) => cached_oracle(p, cfg, dir).map(|(o, _)| Some(o)),
        (Some(cfg), None) => run_oracle(p, cfg).map(Some),
    };
    let (es, baselines, oracle) = if opts.sequential {
        (
            run_es(p, durations)?,
            run_sweep_sequential(p, &p.scenario.baselines)?,
            oracle_run()?,
        )
    } else {
        concurrent(p, durations, oracle_run)?
    };
    let (summary, spectra) = summarize(p, &es, &baselines, oracle.as_ref())?;
    Ok(ScenarioResult {
        summary,
        es,
        baselines,
        oracle,
        spectra,
    })
}

type Members = (RunOutput, Vec<RunOutput>, Option<RunOutput>);

#[cfg(feature = "parallel")]
fn concurrent(
    p: &Prepared,
    durations: DurationSource,
    oracle_run: impl FnOnce() -> Result<Option<RunOutput>> + Send,
) -> Result<Members> {
    crate::scenario::run::in_pool(|| {
        let (es, (baselines, oracle)) = rayon::join(
            || run_es(p, durations),
            || {
                rayon::join(
                    || crate::scenario::run::sweep_on_current_pool(p, &p.scenario.baselines),
                    oracle_run,
                )
            },
        );
        Ok((es?, baselines?, oracle?))
    })?
}

#[cfg(not(feature = "parallel"))]
fn concurrent(
    p: &Prepared,
    durations: DurationSource,
    oracle_run: impl FnOnce() -> Result<Option<RunOutput>> + Send,
) -> Result<Members> {
    Ok((
        run_es(p, durations)?,
        run_sweep_sequential(p, &p.scenario.baselines)?,
        oracle_run()?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Scenario(format!("cannot write {}: {e}", path.display())))
}

/// Writes waveforms, the event trace, the wall-time log, spectra and `summary.json`.
pub fn write_outputs(p: &Prepared, result: &ScenarioResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for run in std::iter::once(&result.es)
        .chain(&result.baselines)
        .chain(&result.oracle)
    {
        let mut w = create(&dir.join(format!("{}.csv", run.id)))?;
        run.waveform.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(report) = &result.es.report {
        let names = TraceNames {
            gates: p.netlist.gate_names.clone(),
            diodes: p.netlist.diode_names.clone(),
        };
        let mut w = create(&dir.join("trace.csv"))?;
        write_trace_csv(&report.events, &names, &mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("wall_time.csv"))?;
        writeln!(w, "cycle,sync_edge,frozen_before,sim_wall_s")?;
        for r in &report.wall {
            writeln!(
                w,
                "{},{},{},{:.16e}",
                r.cycle, r.sync_edge, r.frozen_before, r.sim_wall_s
            )?;
        }
        w.flush()?;
    }
    for (file, spec) in &result.spectra {
        let mut w = create(&dir.join(file))?;
        spec.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut w, &result.summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub window: [f64; 2],
    /// `rms(a - b) / rms(b)` per signal.
    pub relative_error: BTreeMap<String, f64>,
}

/// Relative error of `a` against `b` over their common time span.
pub fn compare(
    a: &Waveform,
    b: &Waveform,
    signals: &[String],
    window: Option<(f64, f64)>,
) -> Result<Comparison> {
    let (a0, a1) = a
        .span()
        .ok_or_else(|| Error::Analysis("first waveform is empty".into()))?;
    let (b0, b1) = b
        .span()
        .ok_or_else(|| Error::Analysis("second waveform is empty".into()))?;
    let overlap = (a0.max(b0), a1.min(b1));
    if !(overlap.0 < overlap.1) {
        return Err(Error::Analysis(format!(
            "no overlap between [{a0:e}, {a1:e}] and [{b0:e}, {b1:e}]"
        )));
    }
    let window = match window {
        Some(w) if w.0 >= overlap.0 && w.1 <= overlap.1 => w,
        Some(w) => {
            return Err(Error::Analysis(format!(
                "window [{:e}, {:e}] outside the common span [{:e}, {:e}]",
                w.0, w.1, overlap.0, overlap.1
            )))
        }
        None => overlap,
    };
    let names: Vec<String> = if signals.is_empty() {
        a.names.iter().filter(|n| b.names.contains(n)).cloned().collect()
    } else {
        signals.to_vec()
    };
    if names.is_empty() {
        return Err(Error::Analysis("no common signals".into()));
    }
    let mut out = BTreeMap::new();
    for n in names {
        let e = relative_error(a, b, &n, window)?;
        out.insert(n, e);
    }
    Ok(Comparison {
        window: [window.0, window.1],
        relative_error: out,
    })
}
