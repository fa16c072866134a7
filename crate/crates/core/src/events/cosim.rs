use std::time::Instant;

use super::scheduler::{CycleTiming, DurationSource, Scheduler, WallRecord};
use super::{Event, EventKind};
use crate::controller::{sample_map, Controller, ControllerInput, PwmConfig, SensorSpec};
use crate::Result;

/// The simulated side of the rendezvous.
pub trait Plant {
    fn probe_names(&self) -> Vec<String>;
    /// Probe values at the current time.
    fn probe_values(&self) -> Result<Vec<f64>>;
    /// Advances over `[t0, t1)` under `command`, appending switch events.
    fn advance_window(
        &mut self,
        cycle: u64,
        t0: f64,
        t1: f64,
        command: &PwmConfig,
        events: &mut Vec<(f64, EventKind)>,
    ) -> Result<()>;
    fn time(&self) -> f64;
    /// Module name used to tag errors raised while advancing.
    fn module(&self) -> &'static str;
}

#[derive(Debug, Clone)]
pub struct CoSimConfig {
    pub t_c: f64,
    pub t_d: f64,
    pub n_cycles: u64,
    pub sensors: SensorSpec,
    pub durations: DurationSource,
}

#[derive(Debug, Clone)]
pub struct CoSimReport {
    pub events: Vec<Event>,
    pub wall: Vec<WallRecord>,
    pub frozen_cycles: u64,
    /// Controller inputs by cycle.
    pub sync_samples: Vec<Vec<f64>>,
}

/// Runs `n_cycles` control windows of `plant` under `controller`.
///
/// Window `k` covers `[k T_c, (k+1) T_c)` and is driven by the command the
/// controller produced from the samples of cycle `k - 1` (the startup
/// command for `k = 0`).
pub fn run_cosim(
    plant: &mut dyn Plant,
    controller: &mut dyn Controller,
    cfg: &CoSimConfig,
) -> Result<CoSimReport> {
    let mut sched = Scheduler::new(CycleTiming::new(cfg.t_c, cfg.t_d)?);
    let names = plant.probe_names();
    let mut command = controller
        .startup()
        .map_err(|e| e.in_cycle("controller", 0, 0.0))?;
    let mut sync_samples = Vec::with_capacity(cfg.n_cycles as usize);
    for k in 0..cfg.n_cycles {
        let t0 = k as f64 * cfg.t_c;
        let t1 = (k + 1) as f64 * cfg.t_c;
        let probes = plant
            .probe_values()
            .map_err(|e| e.in_cycle(plant.module(), k, plant.time()))?;
        let samples =
            sample_map(&names, &probes, &cfg.sensors).map_err(|e| e.in_cycle("controller", k, t0))?;
        sched
            .run_cycle(k, samples.clone(), &command)
            .map_err(|e| e.in_cycle("events", k, t0))?;
        let next = controller
            .step(&ControllerInput {
                cycle: k,
                t: t0,
                samples: &samples,
            })
            .map_err(|e| e.in_cycle("controller", k, t0))?;
        sched.control_done(k);
        sync_samples.push(samples);

        let mut window = Vec::new();
        let started = Instant::now();
        plant
            .advance_window(k, t0, t1, &command, &mut window)
            .map_err(|e| e.in_cycle(plant.module(), k, plant.time()))?;
        let wall = cfg.durations.duration(k, started.elapsed());
        let end_probes = plant
            .probe_values()
            .map_err(|e| e.in_cycle(plant.module(), k, plant.time()))?;
        sched
            .sim_done(k, wall, end_probes, window)
            .map_err(|e| e.in_cycle("events", k, t1))?;
        command = next;
    }
    let (events, wall, timing) = sched.into_parts();
    Ok(CoSimReport {
        events,
        wall,
        frozen_cycles: timing.frozen_cycles,
        sync_samples,
    })
}
