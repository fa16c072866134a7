use std::sync::Arc;

use nalgebra::DVector;

use super::cosim::Plant;
use super::EventKind;
use crate::analysis::Waveform;
use crate::circuit::{InputSource, LtiModel, ModeCache, Netlist, SwitchConfig};
use crate::controller::{pwm_edges, PwmConfig};
use crate::detect::{arm_monitors, diode_transition, post_event_consistency};
use crate::solver::{
    integrate_to_barrier, IntegrationStats, Recorder, SolverSettings, StepControl, Terminal,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingRecord {
    pub t: f64,
    pub diode: usize,
    /// Threshold the monitor was armed with.
    pub threshold: f64,
    pub residual: f64,
    pub iterations: u32,
    pub conducting_after: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub integration: IntegrationStats,
    pub windows: u64,
    pub active_events: u64,
    pub passive_events: u64,
    pub consistency_toggles: u64,
}

/// Passive events allowed at one instant before the session gives up.
const ZENO_LIMIT: usize = 64;

/// Event-driven solver session over one netlist.
///
/// Owns the state vector, the switch configuration and the recorded
/// waveform. Each control window is split at its gate edges and at located
/// diode commutations.
pub struct EsSession {
    cache: Arc<ModeCache>,
    net: Arc<Netlist>,
    thresholds: Vec<(f64, f64)>,
    x: DVector<f64>,
    t: f64,
    cfg: SwitchConfig,
    ctrl: StepControl,
    gates: Vec<bool>,
    waveform: Waveform,
    mode_history: Vec<(f64, SwitchConfig)>,
    crossings: Vec<CrossingRecord>,
    dense_step: Option<f64>,
    stats: SessionStats,
}

struct ProbeRecorder<'a> {
    model: &'a LtiModel,
    net: &'a Netlist,
    out: &'a mut Waveform,
    dense: Option<f64>,
}

impl Recorder for ProbeRecorder<'_> {
    fn record(&mut self, t: f64, x: &DVector<f64>) {
        let u = self.net.inputs_at(t);
        let y = self.model.probe_outputs(x, &u);
        self.out.push(t, &y);
    }

    fn dense_step(&self) -> Option<f64> {
        self.dense
    }
}

impl EsSession {
    /// Starts at `t = 0` from the netlist's initial state with all gates off.
    ///
    /// `dense_step` adds rows on the grid `j * dense_step` evaluated from the
    /// Taylor polynomial of each accepted step.
    pub fn new(
        cache: Arc<ModeCache>,
        settings: &SolverSettings,
        t_c: f64,
        dense_step: Option<f64>,
    ) -> Result<Self> {
        let net = cache.netlist().clone();
        let x = net.initial_state();
        let u = net.inputs_at(0.0);
        let cfg = post_event_consistency(&cache, net.empty_config(), &x, &u, 0.0)?.config;
        let mut session = Self {
            thresholds: net.diode_thresholds(),
            waveform: Waveform::new(net.probe_names()),
            gates: vec![false; net.n_gates()],
            ctrl: settings.control(t_c)?,
            mode_history: vec![(0.0, cfg)],
            crossings: Vec::new(),
            dense_step: dense_step.filter(|h| *h > 0.0),
            stats: SessionStats::default(),
            cache,
            net,
            x,
            t: 0.0,
            cfg,
        };
        let row = session.probe_values()?;
        session.waveform.push(0.0, &row);
        Ok(session)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn config(&self) -> SwitchConfig {
        self.cfg
    }

    pub fn netlist(&self) -> &Arc<Netlist> {
        &self.net
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn into_waveform(self) -> Waveform {
        self.waveform
    }

    /// `(t, config)` at start and after every configuration change.
    pub fn mode_history(&self) -> &[(f64, SwitchConfig)] {
        &self.mode_history
    }

    pub fn crossings(&self) -> &[CrossingRecord] {
        &self.crossings
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    pub fn cache(&self) -> &ModeCache {
        &self.cache
    }

    pub fn probe_values(&self) -> Result<Vec<f64>> {
        let model = self.cache.get(&self.cfg)?;
        Ok(model.probe_outputs(&self.x, &self.net.inputs_at(self.t)))
    }

    fn set_config(&mut self, cfg: SwitchConfig) {
        if cfg != self.cfg {
            self.cfg = cfg;
            self.mode_history.push((self.t, cfg));
        }
    }

    fn settle(&mut self) -> Result<()> {
        let u = self.net.inputs_at(self.t);
        let out = post_event_consistency(&self.cache, self.cfg, &self.x, &u, self.t)?;
        self.stats.consistency_toggles += out.toggled.len() as u64;
        self.set_config(out.config);
        Ok(())
    }

    /// Integrates to `t_end`, handling every diode commutation on the way.
    pub fn integrate_until(&mut self, t_end: f64, events: &mut Vec<(f64, EventKind)>) -> Result<()> {
        let mut stops = self.net.breakpoints(self.t, t_end);
        stops.push(t_end);
        for stop in stops {
            self.integrate_segment(stop, events)?;
        }
        Ok(())
    }

    fn integrate_segment(&mut self, t_end: f64, events: &mut Vec<(f64, EventKind)>) -> Result<()> {
        let mut stalled = 0usize;
        while self.t < t_end {
            let model = self.cache.get(&self.cfg)?;
            let monitors = arm_monitors(&model, &self.thresholds);
            let mut rec = ProbeRecorder {
                model: &model,
                net: &self.net,
                out: &mut self.waveform,
                dense: self.dense_step,
            };
            let out = integrate_to_barrier(
                &model,
                self.net.as_ref(),
                &self.x,
                self.t,
                t_end,
                &monitors,
                self.ctrl,
                &mut self.stats.integration,
                &mut rec,
            )?;
            stalled = if out.t_end > self.t { 0 } else { stalled + 1 };
            self.x = out.x_end;
            self.t = out.t_end;
            self.ctrl = out.ctrl;
            if let Terminal::PassiveEvent { t, fired } = out.terminal {
                let mut cfg = self.cfg;
                for (d, report) in &fired {
                    cfg = diode_transition(&cfg, *d);
                    self.crossings.push(CrossingRecord {
                        t,
                        diode: *d,
                        threshold: monitors[*d].threshold,
                        residual: report.residual,
                        iterations: report.iterations,
                        conducting_after: cfg.diode(*d),
                    });
                }
                self.set_config(cfg);
                self.settle()?;
                self.log_diode_changes(model.config, t, events);
                if stalled > ZENO_LIMIT {
                    return Err(Error::Inconsistent {
                        t,
                        cycle: vec![model.config.to_string(), self.cfg.to_string()],
                    });
                }
            }
        }
        Ok(())
    }

    fn log_diode_changes(&mut self, before: SwitchConfig, t: f64, events: &mut Vec<(f64, EventKind)>) {
        for d in 0..self.thresholds.len() {
            if before.diode(d) != self.cfg.diode(d) {
                self.stats.passive_events += 1;
                events.push((
                    t,
                    EventKind::PassiveSwitch {
                        diode: d,
                        conducting: self.cfg.diode(d),
                    },
                ));
            }
        }
    }

    /// Advances one control window `[t0, t1)` under `command`.
    pub fn simulate_control_cycle(
        &mut self,
        t0: f64,
        t1: f64,
        command: &PwmConfig,
        events: &mut Vec<(f64, EventKind)>,
    ) -> Result<()> {
        if command.gates.len() != self.gates.len() {
            return Err(Error::Dimension(format!(
                "command drives {} gates, netlist has {}",
                command.gates.len(),
                self.gates.len()
            )));
        }
        if self.t != t0 {
            return Err(Error::Protocol(format!(
                "window starts at {t0:e} s but the session is at {:e} s",
                self.t
            )));
        }
        self.stats.windows += 1;
        let schedule = pwm_edges(command, t0, t1, &self.gates);
        for (t_edge, group) in schedule.groups() {
            self.integrate_until(t_edge, events)?;
            let before = self.cfg;
            let mut cfg = self.cfg;
            for e in &group {
                self.gates[e.gate] = e.on;
                cfg.set_gate(e.gate, e.on);
                self.stats.active_events += 1;
                events.push((
                    t_edge,
                    EventKind::ActiveSwitch {
                        gate: e.gate,
                        on: e.on,
                    },
                ));
            }
            self.set_config(cfg);
            self.settle()?;
            self.log_diode_changes(before, t_edge, events);
        }
        self.integrate_until(t1, events)
    }
}

impl Plant for EsSession {
    fn probe_names(&self) -> Vec<String> {
        self.net.probe_names()
    }

    fn probe_values(&self) -> Result<Vec<f64>> {
        EsSession::probe_values(self)
    }

    fn advance_window(
        &mut self,
        _cycle: u64,
        t0: f64,
        t1: f64,
        command: &PwmConfig,
        events: &mut Vec<(f64, EventKind)>,
    ) -> Result<()> {
        self.simulate_control_cycle(t0, t1, command, events)
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn module(&self) -> &'static str {
        "solver"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_netlist;
    use crate::controller::{Carrier, GatePwm};

    fn session(text: &str, t_c: f64) -> EsSession {
        let cache = Arc::new(ModeCache::new(Arc::new(parse_netlist(text).unwrap())));
        EsSession::new(cache, &SolverSettings::default(), t_c, None).unwrap()
    }

    #[test]
    fn idle_window_is_one_integration() {
        let mut s = session(
            r#"{"nodes": ["gnd", "n1"], "elements": [
                {"kind": "resistor", "name": "R", "nodes": ["n1", "gnd"], "resistance": 1},
                {"kind": "capacitor", "name": "C", "nodes": ["n1", "gnd"], "capacitance": 1e-5, "initial_voltage": 1}],
                "probes": [{"name": "v", "kind": "node_voltage", "target": "n1"}]}"#,
            25e-6,
        );
        let cmd = PwmConfig {
            gates: vec![],
            pairs: vec![],
        };
        let mut ev = Vec::new();
        s.simulate_control_cycle(0.0, 25e-6, &cmd, &mut ev).unwrap();
        assert_eq!(s.stats().integration.calls, 1);
        assert_eq!(s.time(), 25e-6);
        assert!(ev.is_empty());
        assert!((s.state()[0] - (-2.5f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn full_bridge_window_splits_at_edges() {
        let mut s = session(
            r#"{"nodes": ["gnd", "dc", "a", "b"], "elements": [
                {"kind": "voltage_source", "name": "V", "nodes": ["dc", "gnd"], "waveform": {"type": "dc", "value": 100}},
                {"kind": "switch", "name": "S1", "nodes": ["dc", "a"]},
                {"kind": "switch", "name": "S2", "nodes": ["a", "gnd"]},
                {"kind": "switch", "name": "S3", "nodes": ["dc", "b"]},
                {"kind": "switch", "name": "S4", "nodes": ["b", "gnd"]},
                {"kind": "inductor", "name": "L", "nodes": ["a", "b"], "inductance": 1e-4},
                {"kind": "resistor", "name": "R", "nodes": ["a", "b"], "resistance": 10}],
                "probes": [{"name": "i", "kind": "branch_current", "target": "L"}]}"#,
            25e-6,
        );
        let gate = |phase: f64| GatePwm {
            carrier: Carrier::Sawtooth,
            period: 25e-6,
            duty: 0.5,
            phase,
            inverted: false,
        };
        // Legs shifted by a quarter period: 4 interior edges, none at the window start.
        let cmd = PwmConfig {
            gates: vec![gate(0.1), gate(0.6), gate(0.35), gate(0.85)],
            pairs: vec![],
        };
        let mut ev = Vec::new();
        s.simulate_control_cycle(0.0, 25e-6, &cmd, &mut ev).unwrap();
        let mut ev = Vec::new();
        let hits_before = s.cache().hits();
        let calls_before = s.stats().integration.calls;
        s.simulate_control_cycle(25e-6, 50e-6, &cmd, &mut ev).unwrap();
        let edges: Vec<f64> = ev.iter().map(|e| e.0).collect();
        assert!(edges.len() >= 4);
        let distinct = {
            let mut d = edges.clone();
            d.dedup();
            d.len()
        };
        assert_eq!(s.stats().integration.calls - calls_before, distinct as u64 + 1);
        assert!(s.cache().hits() - hits_before >= 4);
    }
}
