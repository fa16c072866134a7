use crate::analysis::Waveform;
use crate::baseline::{OraclePlant, TsPlant};
use crate::circuit::SwitchConfig;
use crate::events::{
    run_cosim, CoSimReport, CrossingRecord, DurationSource, EsSession, EventKind, Plant, SessionStats,
};
use crate::Result;

use super::config::{BaselineConfig, OracleConfig, Prepared};

/// One diode state change: `(t, diode, conducting_after)`.
pub type DiodeChange = (f64, usize, bool);

/// Everything one solver run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub id: String,
    pub waveform: Waveform,
    pub mode_history: Vec<(f64, SwitchConfig)>,
    pub diode_changes: Vec<DiodeChange>,
    pub active_events: usize,
    pub frozen_cycles: u64,
    /// Absent for runs restored from the oracle cache.
    pub report: Option<CoSimReport>,
    pub session: Option<SessionStats>,
    /// Located diode crossings of the event-driven run.
    pub crossings: Vec<CrossingRecord>,
}

fn diode_changes(report: &CoSimReport) -> Vec<DiodeChange> {
    report
        .events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::PassiveSwitch { diode, conducting } => Some((e.t_sim, diode, conducting)),
            _ => None,
        })
        .collect()
}

fn active_events(report: &CoSimReport) -> usize {
    report
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::ActiveSwitch { .. }))
        .count()
}

fn drive(p: &Prepared, plant: &mut dyn Plant, durations: DurationSource) -> Result<CoSimReport> {
    let mut controller = p.controller()?;
    run_cosim(plant, controller.as_mut(), &p.cosim_config(durations))
}

/// The event-driven engine under the scenario's controller.
pub fn run_es(p: &Prepared, durations: DurationSource) -> Result<RunOutput> {
    let mut session = EsSession::new(
        p.cache.clone(),
        &p.scenario.solver,
        p.t_c(),
        p.scenario.record.dense_step,
    )?;
    let report = drive(p, &mut session, durations)?;
    Ok(RunOutput {
        id: "es".into(),
        diode_changes: diode_changes(&report),
        active_events: active_events(&report),
        frozen_cycles: report.frozen_cycles,
        mode_history: session.mode_history().to_vec(),
        session: Some(session.stats()),
        crossings: session.crossings().to_vec(),
        waveform: session.into_waveform(),
        report: Some(report),
    })
}

/// A fixed-step baseline; scheduling uses ideal timing.
pub fn run_baseline(p: &Prepared, cfg: &BaselineConfig) -> Result<RunOutput> {
    let mut plant = TsPlant::new(p.cache.clone(), cfg.method, cfg.h, cfg.record_every)?;
    let report = drive(p, &mut plant, DurationSource::Ideal)?;
    plant.finish()?;
    Ok(RunOutput {
        id: cfg.id(),
        diode_changes: diode_changes(&report),
        active_events: active_events(&report),
        frozen_cycles: report.frozen_cycles,
        mode_history: plant.mode_history().to_vec(),
        session: None,
        crossings: Vec::new(),
        waveform: plant.into_waveform(),
        report: Some(report),
    })
}

/// The fine-step trapezoidal reference, computed from scratch.
pub fn run_oracle(p: &Prepared, cfg: &OracleConfig) -> Result<RunOutput> {
    let mut plant = OraclePlant::new(p.cache.clone(), cfg.h, cfg.record_every)?;
    let report = drive(p, &mut plant, DurationSource::Ideal)?;
    plant.finish()?;
    Ok(RunOutput {
        id: "oracle".into(),
        diode_changes: diode_changes(&report),
        active_events: active_events(&report),
        frozen_cycles: report.frozen_cycles,
        mode_history: plant.mode_history().to_vec(),
        session: None,
        crossings: Vec::new(),
        waveform: plant.into_waveform(),
        report: Some(report),
    })
}

/// Width cap for parallel sweeps from `ESCHIL_THREADS`.
pub fn thread_cap() -> Option<usize> {
    std::env::var("ESCHIL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Runs every baseline one after another.
pub fn run_sweep_sequential(p: &Prepared, list: &[BaselineConfig]) -> Result<Vec<RunOutput>> {
    list.iter().map(|b| run_baseline(p, b)).collect()
}

/// Runs the baselines concurrently; results keep the order of `list`.
#[cfg(feature = "parallel")]
pub fn run_sweep_parallel(p: &Prepared, list: &[BaselineConfig]) -> Result<Vec<RunOutput>> {
    in_pool(|| sweep_on_current_pool(p, list))?
}

#[cfg(feature = "parallel")]
pub(crate) fn sweep_on_current_pool(p: &Prepared, list: &[BaselineConfig]) -> Result<Vec<RunOutput>> {
    use rayon::prelude::*;
    list.par_iter().map(|b| run_baseline(p, b)).collect()
}

/// Runs `work` on a pool capped by `ESCHIL_THREADS`, or on the global pool.
#[cfg(feature = "parallel")]
pub(crate) fn in_pool<R: Send>(work: impl FnOnce() -> R + Send) -> Result<R> {
    match thread_cap() {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::Error::Scenario(format!("thread pool: {e}")))?
            .install(work)),
        None => Ok(work()),
    }
}

/// Parallel when the `parallel` feature is enabled, sequential otherwise.
pub fn run_sweep(p: &Prepared, list: &[BaselineConfig]) -> Result<Vec<RunOutput>> {
    #[cfg(feature = "parallel")]
    {
        run_sweep_parallel(p, list)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sweep_sequential(p, list)
    }
}
