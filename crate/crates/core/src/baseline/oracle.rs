use std::sync::Arc;

use nalgebra::DVector;

use super::step::{Propagator, PropagatorCache};
use crate::analysis::Waveform;
use crate::circuit::{InputSource, LtiModel, ModeCache, Netlist, SwitchConfig};
use crate::controller::{pwm_edges, PwmConfig};
use crate::detect::{arm_monitors, post_event_consistency, PassiveMonitor};
use crate::events::{EventKind, Plant};
use crate::{Error, Result};

/// Events allowed at one instant before the run is declared degenerate.
const ZENO_LIMIT: usize = 64;
const TIE_TOL: f64 = 1e-15;

/// Fine-step trapezoidal reference.
///
/// Steps on the grid `n h`, splits exactly at gate edges, and locates every
/// diode threshold crossing by bisecting the length of the trapezoidal step
/// down to adjacent floating-point values.
pub struct OraclePlant {
    h: f64,
    cache: Arc<ModeCache>,
    net: Arc<Netlist>,
    thresholds: Vec<(f64, f64)>,
    steps: PropagatorCache,
    x: DVector<f64>,
    t: f64,
    grid: u64,
    aligned: bool,
    cfg: SwitchConfig,
    gates: Vec<bool>,
    waveform: Waveform,
    mode_history: Vec<(f64, SwitchConfig)>,
    crossings: Vec<(f64, usize, bool)>,
    record_every: u64,
}

struct Located {
    offset: f64,
    diodes: Vec<usize>,
}

impl OraclePlant {
    /// `record_every` keeps one grid row in that many; event rows are always kept.
    pub fn new(cache: Arc<ModeCache>, h: f64, record_every: u64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Scenario(format!(
                "oracle step must be positive, got {h:e}"
            )));
        }
        let net = cache.netlist().clone();
        let x = net.initial_state();
        let cfg = post_event_consistency(&cache, net.empty_config(), &x, &net.inputs_at(0.0), 0.0)?.config;
        let mut plant = Self {
            h,
            thresholds: net.diode_thresholds(),
            steps: PropagatorCache::default(),
            waveform: Waveform::new(net.probe_names()),
            gates: vec![false; net.n_gates()],
            mode_history: vec![(0.0, cfg)],
            crossings: Vec::new(),
            record_every: record_every.max(1),
            cache,
            net,
            x,
            t: 0.0,
            grid: 0,
            aligned: true,
            cfg,
        };
        let row = plant.probe_values()?;
        plant.waveform.push(0.0, &row);
        Ok(plant)
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn into_waveform(self) -> Waveform {
        self.waveform
    }

    pub fn mode_history(&self) -> &[(f64, SwitchConfig)] {
        &self.mode_history
    }

    /// `(t, diode, conducting_after)` for every located crossing.
    pub fn crossings(&self) -> &[(f64, usize, bool)] {
        &self.crossings
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    /// Records the row at the current time; call once after the last window.
    pub fn finish(&mut self) -> Result<()> {
        let row = self.probe_values()?;
        self.waveform.push(self.t, &row);
        Ok(())
    }

    fn advance(
        &self,
        model: &LtiModel,
        x: &DVector<f64>,
        t: f64,
        s: f64,
        out: &mut DVector<f64>,
    ) -> Result<()> {
        let w = self.net.inputs_at(t) + self.net.inputs_at(t + s);
        Propagator::trapezoidal(model, s)?.apply(x, &w, out);
        Ok(())
    }

    fn phi(&self, model: &LtiModel, mon: &PassiveMonitor, x: &DVector<f64>, t: f64) -> f64 {
        mon.signed(model.output(mon.output, x, &self.net.inputs_at(t)))
    }

    fn locate(
        &self,
        model: &LtiModel,
        monitors: &[PassiveMonitor],
        s: f64,
        x1: &DVector<f64>,
        t1: f64,
    ) -> Result<Option<Located>> {
        let mut best: Option<Located> = None;
        let mut xm = self.x.clone();
        for mon in monitors {
            let f0 = self.phi(model, mon, &self.x, self.t);
            let f1 = self.phi(model, mon, x1, t1);
            if f1 < 0.0 || (f0 >= 0.0 && f1 <= f0) {
                continue;
            }
            let offset = if f0 >= 0.0 {
                0.0
            } else {
                let (mut lo, mut hi) = (0.0, s);
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi || self.t + mid == self.t + hi {
                        break;
                    }
                    self.advance(model, &self.x, self.t, mid, &mut xm)?;
                    if self.phi(model, mon, &xm, self.t + mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            match &mut best {
                Some(b) if (offset - b.offset).abs() <= TIE_TOL => {
                    b.offset = b.offset.min(offset);
                    b.diodes.push(mon.diode);
                }
                Some(b) if offset > b.offset => {}
                _ => {
                    best = Some(Located {
                        offset,
                        diodes: vec![mon.diode],
                    })
                }
            }
        }
        Ok(best)
    }

    fn settle(&mut self, before: SwitchConfig, events: &mut Vec<(f64, EventKind)>) -> Result<()> {
        let u = self.net.inputs_at(self.t);
        let out = post_event_consistency(&self.cache, self.cfg, &self.x, &u, self.t)?;
        self.cfg = out.config;
        if self.cfg != before {
            self.mode_history.push((self.t, self.cfg));
            for d in 0..self.thresholds.len() {
                if before.diode(d) != self.cfg.diode(d) {
                    events.push((
                        self.t,
                        EventKind::PassiveSwitch {
                            diode: d,
                            conducting: self.cfg.diode(d),
                        },
                    ));
                    self.crossings.push((self.t, d, self.cfg.diode(d)));
                }
            }
        }
        Ok(())
    }

    fn run_until(&mut self, t_end: f64, events: &mut Vec<(f64, EventKind)>) -> Result<()> {
        let mut stops = self.net.breakpoints(self.t, t_end);
        stops.push(t_end);
        for stop in stops {
            self.run_segment(stop, events)?;
        }
        Ok(())
    }

    fn run_segment(&mut self, t_end: f64, events: &mut Vec<(f64, EventKind)>) -> Result<()> {
        let mut x1 = self.x.clone();
        let mut stalled = 0usize;
        let mut model = self.cache.get(&self.cfg)?;
        let mut monitors = arm_monitors(&model, &self.thresholds);
        while self.t < t_end {
            let next_grid = (self.grid + 1) as f64 * self.h;
            let (target, reaches_grid) = if next_grid <= t_end {
                (next_grid, true)
            } else if next_grid - t_end <= 1e-6 * self.h {
                (t_end, true)
            } else {
                (t_end, false)
            };
            let s = target - self.t;
            let u0 = self.net.inputs_at(self.t);
            let w = &u0 + self.net.inputs_at(target);
            if self.aligned && reaches_grid {
                self.steps
                    .trapezoidal(&model, self.h)?
                    .apply(&self.x, &w, &mut x1);
            } else {
                Propagator::trapezoidal(&model, s)?.apply(&self.x, &w, &mut x1);
            }

            match self.locate(&model, &monitors, s, &x1, target)? {
                None => {
                    std::mem::swap(&mut self.x, &mut x1);
                    self.t = target;
                    stalled = 0;
                    if reaches_grid {
                        self.grid += 1;
                        self.aligned = true;
                        if self.grid.is_multiple_of(self.record_every) {
                            let row = model.probe_outputs(&self.x, &self.net.inputs_at(self.t));
                            self.waveform.push(self.t, &row);
                        }
                    } else {
                        self.aligned = false;
                    }
                }
                Some(hit) => {
                    if hit.offset >= s {
                        std::mem::swap(&mut self.x, &mut x1);
                        self.t = target;
                        if reaches_grid {
                            self.grid += 1;
                        }
                        self.aligned = reaches_grid;
                    } else if hit.offset > 0.0 {
                        self.advance(&model, &self.x, self.t, hit.offset, &mut x1)?;
                        std::mem::swap(&mut self.x, &mut x1);
                        self.t += hit.offset;
                        self.aligned = false;
                    }
                    stalled = if hit.offset > 0.0 { 0 } else { stalled + 1 };
                    let row = model.probe_outputs(&self.x, &self.net.inputs_at(self.t));
                    self.waveform.push(self.t, &row);
                    let before = self.cfg;
                    for d in hit.diodes {
                        self.cfg.toggle_diode(d);
                    }
                    self.settle(before, events)?;
                    if stalled > ZENO_LIMIT {
                        return Err(Error::Inconsistent {
                            t: self.t,
                            cycle: vec![before.to_string(), self.cfg.to_string()],
                        });
                    }
                    model = self.cache.get(&self.cfg)?;
                    monitors = arm_monitors(&model, &self.thresholds);
                }
            }
        }
        Ok(())
    }
}

impl Plant for OraclePlant {
    fn probe_names(&self) -> Vec<String> {
        self.net.probe_names()
    }

    fn probe_values(&self) -> Result<Vec<f64>> {
        let model = self.cache.get(&self.cfg)?;
        Ok(model.probe_outputs(&self.x, &self.net.inputs_at(self.t)))
    }

    fn advance_window(
        &mut self,
        _cycle: u64,
        t0: f64,
        t1: f64,
        command: &PwmConfig,
        events: &mut Vec<(f64, EventKind)>,
    ) -> Result<()> {
        if (self.t - t0).abs() > 1e-6 * self.h {
            return Err(Error::Protocol(format!(
                "window starts at {t0:e} s but the oracle is at {:e} s",
                self.t
            )));
        }
        let schedule = pwm_edges(command, t0, t1, &self.gates);
        for (t_edge, group) in schedule.groups() {
            self.run_until(t_edge, events)?;
            let before = self.cfg;
            for e in &group {
                self.gates[e.gate] = e.on;
                self.cfg.set_gate(e.gate, e.on);
                events.push((
                    t_edge,
                    EventKind::ActiveSwitch {
                        gate: e.gate,
                        on: e.on,
                    },
                ));
            }
            if self.cfg != before {
                self.mode_history.push((self.t, self.cfg));
            }
            let gated = self.cfg;
            self.settle(gated, events)?;
        }
        self.run_until(t1, events)
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn module(&self) -> &'static str {
        "oracle"
    }
}
