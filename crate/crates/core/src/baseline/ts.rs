use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::step::{fe_step_into, PropagatorCache};
use crate::analysis::Waveform;
use crate::circuit::{LtiModel, ModeCache, Netlist, SwitchConfig};
use crate::controller::{gate_states_at, PwmConfig};
use crate::detect::post_event_consistency;
use crate::events::{EventKind, Plant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(alias = "FE")]
    Fe,
    #[serde(alias = "BE")]
    Be,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fe => "fe",
            Method::Be => "be",
        })
    }
}

/// Number of steps of length `h` in `t_c`, when `h` divides it.
pub fn steps_per_cycle(t_c: f64, h: f64) -> Result<u64> {
    let n = (t_c / h).round();
    if !(h > 0.0 && n >= 1.0 && (n * h - t_c).abs() <= 1e-12 * t_c) {
        return Err(Error::Scenario(format!(
            "step {h:e} s does not divide the control period {t_c:e} s"
        )));
    }
    Ok(n as u64)
}

/// Fixed-step plant with per-step diode decisions and grid-sampled gates.
///
/// Diode bits for step `n` are decided from the outputs at `t_n` of the
/// model used in step `n - 1`: a conducting diode whose current fell below
/// its threshold blocks, a blocked diode whose voltage exceeds its threshold
/// conducts. Gate states are the PWM command sampled at `t_n`.
pub struct TsPlant {
    method: Method,
    h: f64,
    cache: Arc<ModeCache>,
    net: Arc<Netlist>,
    thresholds: Vec<(f64, f64)>,
    steps: PropagatorCache,
    x: DVector<f64>,
    n: u64,
    cfg: SwitchConfig,
    waveform: Waveform,
    mode_history: Vec<(f64, SwitchConfig)>,
    record_every: u64,
}

impl TsPlant {
    pub fn new(cache: Arc<ModeCache>, method: Method, h: f64, record_every: u64) -> Result<Self> {
        let net = cache.netlist().clone();
        let x = net.initial_state();
        let cfg = post_event_consistency(&cache, net.empty_config(), &x, &net.inputs_at(0.0), 0.0)?.config;
        let mut plant = Self {
            method,
            h,
            thresholds: net.diode_thresholds(),
            steps: PropagatorCache::default(),
            waveform: Waveform::new(net.probe_names()),
            mode_history: vec![(0.0, cfg)],
            record_every: record_every.max(1),
            cache,
            net,
            x,
            n: 0,
            cfg,
        };
        let row = plant.probe_values()?;
        plant.waveform.push(0.0, &row);
        Ok(plant)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn step_size(&self) -> f64 {
        self.h
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

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    /// Records the row at the current time; call once after the last window.
    pub fn finish(&mut self) -> Result<()> {
        let row = self.probe_values()?;
        self.waveform.push(self.t(), &row);
        Ok(())
    }

    fn t(&self) -> f64 {
        self.n as f64 * self.h
    }

    fn decide_diodes(&self, model: &LtiModel, u: &DVector<f64>, cfg: &mut SwitchConfig) {
        for (d, &(v_th, i_th)) in self.thresholds.iter().enumerate() {
            let rows = model.diode_outputs[d];
            if cfg.diode(d) {
                if model.output(rows.current, &self.x, u) < i_th {
                    cfg.set_diode(d, false);
                }
            } else if model.output(rows.voltage, &self.x, u) > v_th {
                cfg.set_diode(d, true);
            }
        }
    }

    fn step(&mut self, model: &LtiModel, scratch: &mut DVector<f64>) -> Result<()> {
        let t = self.t();
        match self.method {
            Method::Fe => {
                let u = self.net.inputs_at(t);
                fe_step_into(model, &self.x, &u, self.h, scratch);
            }
            Method::Be => {
                let u_next = self.net.inputs_at((self.n + 1) as f64 * self.h);
                self.steps
                    .backward_euler(model, self.h)?
                    .apply(&self.x, &u_next, scratch);
            }
        }
        std::mem::swap(&mut self.x, scratch);
        self.n += 1;
        Ok(())
    }
}

impl Plant for TsPlant {
    fn probe_names(&self) -> Vec<String> {
        self.net.probe_names()
    }

    fn probe_values(&self) -> Result<Vec<f64>> {
        let model = self.cache.get(&self.cfg)?;
        Ok(model.probe_outputs(&self.x, &self.net.inputs_at(self.t())))
    }

    fn advance_window(
        &mut self,
        _cycle: u64,
        t0: f64,
        t1: f64,
        command: &PwmConfig,
        events: &mut Vec<(f64, EventKind)>,
    ) -> Result<()> {
        let start = (t0 / self.h).round() as u64;
        let end = (t1 / self.h).round() as u64;
        if start != self.n {
            return Err(Error::Protocol(format!(
                "window starts at {t0:e} s but the plant is at {:e} s",
                self.t()
            )));
        }
        let mut scratch = self.x.clone();
        let mut model = self.cache.get(&self.cfg)?;
        while self.n < end {
            let t = self.t();
            let u = self.net.inputs_at(t);
            let mut cfg = self.cfg;
            for (g, on) in gate_states_at(command, t).into_iter().enumerate() {
                if cfg.gate(g) != on {
                    cfg.set_gate(g, on);
                    events.push((t, EventKind::ActiveSwitch { gate: g, on }));
                }
            }
            self.decide_diodes(&model, &u, &mut cfg);
            if cfg != self.cfg {
                for d in 0..self.thresholds.len() {
                    if cfg.diode(d) != self.cfg.diode(d) {
                        events.push((
                            t,
                            EventKind::PassiveSwitch {
                                diode: d,
                                conducting: cfg.diode(d),
                            },
                        ));
                    }
                }
                self.cfg = cfg;
                self.mode_history.push((t, cfg));
                model = self.cache.get(&cfg)?;
            }
            if self.n.is_multiple_of(self.record_every) && self.n > 0 {
                let row = model.probe_outputs(&self.x, &u);
                self.waveform.push(t, &row);
            }
            self.step(&model, &mut scratch)?;
        }
        Ok(())
    }

    fn time(&self) -> f64 {
        self.t()
    }

    fn module(&self) -> &'static str {
        "baseline"
    }
}
