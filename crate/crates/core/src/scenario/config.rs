use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baseline::{steps_per_cycle, Method};
use crate::circuit::{ModeCache, Netlist};
use crate::controller::{
    BuiltinController, ComplementaryPair, ControlLaw, Controller, ExternalController, GatePwm, PwmConfig,
    RxCurrentPi, SensorSpec, TxPhaseShift,
};
use crate::events::{CoSimConfig, DurationSource};
use crate::solver::SolverSettings;
use crate::{Error, Result};

/// One reproducible experiment: circuit, controller, solvers and metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: String,
    /// Inline netlist document.
    pub netlist: Value,
    /// Simulated time in seconds; a whole number of control periods.
    pub duration: f64,
    pub control: ControlConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub record: RecordConfig,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub baselines: Vec<BaselineConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Control period `T_c` in seconds.
    pub period: f64,
    /// Delay from clock edge to sampling, in seconds.
    #[serde(default)]
    pub sample_delay: f64,
    /// Startup PWM setting of every gate, by switch name.
    #[serde(default)]
    pub gates: BTreeMap<String, GatePwm>,
    #[serde(default)]
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub laws: Vec<LawConfig>,
    #[serde(default)]
    pub sensors: SensorSpec,
    /// `host:port` of an external controller; replaces the laws.
    #[serde(default)]
    pub external: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub primary: String,
    pub secondary: String,
    #[serde(default)]
    pub dead_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    PhaseShift {
        gate: String,
        steady_shift: f64,
        ramp_time: f64,
    },
    CurrentPi {
        gate: String,
        /// Probe name of the measured current.
        sensor: String,
        setpoint: f64,
        kp: f64,
        ki: f64,
        #[serde(default)]
        enable_time: f64,
        #[serde(default = "one_u64")]
        decimation: u64,
        #[serde(default)]
        initial_duty: f64,
    },
    FixedDuty {
        gate: String,
        duty: f64,
    },
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordConfig {
    /// Extra event-driven output rows on the grid `j * dense_step`.
    #[serde(default)]
    pub dense_step: Option<f64>,
}

/// Wall-time model driving frozen-cycle decisions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimingConfig {
    #[default]
    Ideal,
    Measured,
    Scripted {
        durations: Vec<f64>,
    },
}

impl TimingConfig {
    pub fn source(&self) -> DurationSource {
        match self {
            TimingConfig::Ideal => DurationSource::Ideal,
            TimingConfig::Measured => DurationSource::Measured,
            TimingConfig::Scripted { durations } => DurationSource::Scripted(durations.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub method: Method,
    pub h: f64,
    #[serde(default = "one_u64")]
    pub record_every: u64,
}

impl BaselineConfig {
    pub fn id(&self) -> String {
        format!("{}_{}", self.method, step_label(self.h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub h: f64,
    #[serde(default = "one_u64")]
    pub record_every: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Analysis window; defaults to the whole run.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Signals reported by RMS and by relative error against the oracle.
    #[serde(default)]
    pub signals: Vec<String>,
    /// Signals reported by time-weighted mean.
    #[serde(default)]
    pub means: Vec<String>,
    /// Window for `means`; defaults to `window`.
    #[serde(default)]
    pub mean_window: Option<[f64; 2]>,
    #[serde(default)]
    pub chatter: Option<ChatterConfig>,
    #[serde(default)]
    pub dcm: Option<DcmConfig>,
    #[serde(default)]
    pub spectra: Vec<SpectrumConfig>,
}

/// Sign alternations of `signal` inside the oracle's all-blocked spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatterConfig {
    pub signal: String,
    /// Trimmed from both ends of every span, in seconds.
    #[serde(default)]
    pub margin: f64,
}

/// Absolute-error table at times spread inside the oracle's all-blocked spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcmConfig {
    pub signal: String,
    #[serde(default)]
    pub margin: f64,
    /// Sample times per span.
    #[serde(default = "five")]
    pub per_span: usize,
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub signal: String,
    pub bins: usize,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Run ids to transform; the first is the reference for band ratios.
    #[serde(default = "es_only")]
    pub runs: Vec<String>,
    /// When set, magnitudes are averaged over the gaps between harmonics of this frequency.
    #[serde(default)]
    pub fundamental: Option<f64>,
    #[serde(default = "twenty")]
    pub harmonics: usize,
}

fn es_only() -> Vec<String> {
    vec!["es".into()]
}

fn twenty() -> usize {
    20
}

/// `100ns`, `1ns`, `250ps`, or seconds in exponent form.
pub fn step_label(h: f64) -> String {
    for (scale, unit) in [(1e9, "ns"), (1e12, "ps")] {
        let v = h * scale;
        if v >= 1.0 && (v - v.round()).abs() <= 1e-9 * v {
            return format!("{}{unit}", v.round() as u64);
        }
    }
    format!("{h:e}s")
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn window(&self) -> (f64, f64) {
        self.metrics.window.map_or((0.0, self.duration), |[a, b]| (a, b))
    }

    pub fn mean_window(&self) -> (f64, f64) {
        self.metrics
            .mean_window
            .map_or_else(|| self.window(), |[a, b]| (a, b))
    }
}

/// A validated scenario with its netlist parsed and controller resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub netlist: Arc<Netlist>,
    pub cache: Arc<ModeCache>,
    pub template: PwmConfig,
    pub laws: Vec<ControlLaw>,
    pub n_cycles: u64,
}

impl Prepared {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let netlist = Arc::new(Netlist::from_value(&scenario.netlist)?);
        let ctl = &scenario.control;
        if !(ctl.period > 0.0 && ctl.period.is_finite()) {
            return Err(Error::Scenario(format!(
                "control period must be positive, got {}",
                ctl.period
            )));
        }
        if !(0.0..ctl.period).contains(&ctl.sample_delay) {
            return Err(Error::Scenario("sample delay must lie in [0, period)".into()));
        }
        let n_cycles = (scenario.duration / ctl.period).round();
        if !(scenario.duration > 0.0 && n_cycles >= 1.0)
            || (n_cycles * ctl.period - scenario.duration).abs() > 1e-9 * scenario.duration
        {
            return Err(Error::Scenario(format!(
                "duration {} s is not a whole number of control periods",
                scenario.duration
            )));
        }

        let gate = |name: &str| {
            netlist
                .gate_index(name)
                .ok_or_else(|| Error::Scenario(format!("unknown gate '{name}'")))
        };
        for name in ctl.gates.keys() {
            gate(name)?;
        }
        let mut gates = Vec::with_capacity(netlist.n_gates());
        for g in 0..netlist.n_gates() {
            let name = netlist.gate_names[g].clone();
            let pwm = ctl
                .gates
                .get(&name)
                .ok_or_else(|| Error::Scenario(format!("no PWM setting for gate '{name}'")))?;
            gates.push(pwm.clone());
        }
        let pairs = ctl
            .pairs
            .iter()
            .map(|p| {
                Ok(ComplementaryPair {
                    primary: gate(&p.primary)?,
                    secondary: gate(&p.secondary)?,
                    dead_time: p.dead_time,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let template = PwmConfig { gates, pairs };
        template.validate()?;

        let probes = netlist.probe_names();
        let sensor_input = |probe: &str| -> Result<usize> {
            let found = if ctl.sensors.sensors.is_empty() {
                probes.iter().position(|p| p == probe)
            } else {
                ctl.sensors.sensors.iter().position(|s| s.probe == probe)
            };
            found.ok_or_else(|| Error::Scenario(format!("controller input '{probe}' is not sensed")))
        };
        for s in &ctl.sensors.sensors {
            if !probes.contains(&s.probe) {
                return Err(Error::Scenario(format!(
                    "sensor references unknown probe '{}'",
                    s.probe
                )));
            }
        }
        let laws = ctl
            .laws
            .iter()
            .map(|law| {
                Ok(match law {
                    LawConfig::PhaseShift {
                        gate: g,
                        steady_shift,
                        ramp_time,
                    } => ControlLaw::PhaseShift(TxPhaseShift {
                        gate: gate(g)?,
                        steady_shift: *steady_shift,
                        ramp_time: *ramp_time,
                    }),
                    LawConfig::CurrentPi {
                        gate: g,
                        sensor,
                        setpoint,
                        kp,
                        ki,
                        enable_time,
                        decimation,
                        initial_duty,
                    } => ControlLaw::CurrentPi(RxCurrentPi {
                        gate: gate(g)?,
                        input: sensor_input(sensor)?,
                        setpoint: *setpoint,
                        kp: *kp,
                        ki: *ki,
                        enable_time: *enable_time,
                        decimation: *decimation,
                        initial_duty: *initial_duty,
                        integrator: 0.0,
                        duty: 0.0,
                    }),
                    LawConfig::FixedDuty { gate: g, duty } => {
                        if !(0.0..=1.0).contains(duty) {
                            return Err(Error::Scenario(format!("duty {duty} outside [0, 1]")));
                        }
                        ControlLaw::FixedDuty {
                            gate: gate(g)?,
                            duty: *duty,
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;

        for b in &scenario.baselines {
            steps_per_cycle(ctl.period, b.h)?;
        }
        if let Some(o) = &scenario.oracle {
            if !(o.h > 0.0) {
                return Err(Error::Scenario("oracle step must be positive".into()));
            }
        }
        scenario.solver.control(ctl.period)?;
        let m = &scenario.metrics;
        let mut signals: Vec<&String> = m.signals.iter().chain(&m.means).collect();
        signals.extend(m.chatter.iter().map(|c| &c.signal));
        signals.extend(m.dcm.iter().map(|c| &c.signal));
        signals.extend(m.spectra.iter().map(|c| &c.signal));
        for s in signals {
            if !probes.contains(s) {
                return Err(Error::Scenario(format!("metric references unknown probe '{s}'")));
            }
        }
        for (a, b) in [scenario.window(), scenario.mean_window()] {
            if !(0.0 <= a && a < b && b <= scenario.duration) {
                return Err(Error::Scenario(format!(
                    "metric window [{a}, {b}] outside the run"
                )));
            }
        }

        Ok(Self {
            cache: Arc::new(ModeCache::new(Arc::clone(&netlist))),
            netlist,
            template,
            laws,
            n_cycles: n_cycles as u64,
            scenario,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(Scenario::load(path)?)
    }

    pub fn t_c(&self) -> f64 {
        self.scenario.control.period
    }

    /// A fresh controller in its initial state.
    pub fn controller(&self) -> Result<Box<dyn Controller>> {
        Ok(match &self.scenario.control.external {
            Some(addr) => Box::new(ExternalController::connect(addr.as_str(), self.template.clone())?),
            None => Box::new(BuiltinController {
                template: self.template.clone(),
                laws: self.laws.clone(),
                t_c: self.t_c(),
            }),
        })
    }

    pub fn cosim_config(&self, durations: DurationSource) -> CoSimConfig {
        CoSimConfig {
            t_c: self.t_c(),
            t_d: self.scenario.control.sample_delay,
            n_cycles: self.n_cycles,
            sensors: self.scenario.control.sensors.clone(),
            durations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(step_label(100e-9), "100ns");
        assert_eq!(step_label(1e-9), "1ns");
        assert_eq!(step_label(5e-11), "50ps");
        assert_eq!(step_label(1e-3), "1000000ns");
    }
}
