use serde::{Deserialize, Serialize};

use super::{Controller, ControllerInput, PwmConfig};
use crate::Result;

/// Open-loop phase-shift ramp on one gate's carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxPhaseShift {
    pub gate: usize,
    /// Final phase shift as a fraction of the carrier period.
    pub steady_shift: f64,
    pub ramp_time: f64,
}

impl TxPhaseShift {
    pub fn shift_at(&self, t: f64) -> f64 {
        if self.ramp_time <= 0.0 || t >= self.ramp_time {
            self.steady_shift
        } else {
            self.steady_shift * (t / self.ramp_time).max(0.0)
        }
    }
}

/// Discrete PI on one sampled current, driving one gate's duty.
///
/// Runs every `decimation` control cycles once `enable_time` is reached and
/// holds the duty at zero before that. The integrator is frozen while the
/// output saturates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxCurrentPi {
    pub gate: usize,
    /// Index of the measured current in the controller inputs.
    pub input: usize,
    pub setpoint: f64,
    pub kp: f64,
    /// Integral gain in 1/(A s).
    pub ki: f64,
    pub enable_time: f64,
    pub decimation: u64,
    pub initial_duty: f64,
    #[serde(skip)]
    pub integrator: f64,
    #[serde(skip)]
    pub duty: f64,
}

impl RxCurrentPi {
    pub fn update(&mut self, cycle: u64, t: f64, measured: f64, t_c: f64) -> f64 {
        if t < self.enable_time {
            self.integrator = 0.0;
            self.duty = 0.0;
            return 0.0;
        }
        if !cycle.is_multiple_of(self.decimation.max(1)) {
            return self.duty;
        }
        let ts = t_c * self.decimation.max(1) as f64;
        let err = self.setpoint - measured;
        let candidate = self.integrator + self.ki * ts * err;
        let raw = self.initial_duty + self.kp * err + candidate;
        self.duty = raw.clamp(0.0, 1.0);
        if raw == self.duty {
            self.integrator = candidate;
        }
        self.duty
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControlLaw {
    PhaseShift(TxPhaseShift),
    CurrentPi(RxCurrentPi),
    FixedDuty { gate: usize, duty: f64 },
}

/// In-process controller applying its laws to a template command.
#[derive(Debug, Clone)]
pub struct BuiltinController {
    pub template: PwmConfig,
    pub laws: Vec<ControlLaw>,
    pub t_c: f64,
}

impl BuiltinController {
    fn command(&mut self, input: Option<&ControllerInput<'_>>) -> PwmConfig {
        let mut cmd = self.template.clone();
        let (cycle, t) = input.map_or((0, 0.0), |i| (i.cycle, i.t));
        for law in &mut self.laws {
            match law {
                ControlLaw::PhaseShift(ps) => {
                    // The command is latched for the window after the sample.
                    cmd.gates[ps.gate].phase = ps.shift_at(t).rem_euclid(1.0);
                }
                ControlLaw::CurrentPi(pi) => {
                    cmd.gates[pi.gate].duty = match input {
                        Some(i) => pi.update(cycle, t, i.samples[pi.input], self.t_c),
                        None => 0.0,
                    };
                }
                ControlLaw::FixedDuty { gate, duty } => cmd.gates[*gate].duty = *duty,
            }
        }
        cmd
    }
}

impl Controller for BuiltinController {
    fn startup(&mut self) -> Result<PwmConfig> {
        Ok(self.command(None))
    }

    fn step(&mut self, input: &ControllerInput<'_>) -> Result<PwmConfig> {
        Ok(self.command(Some(input)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi() -> RxCurrentPi {
        RxCurrentPi {
            gate: 0,
            input: 0,
            setpoint: 100.0,
            kp: 0.002,
            ki: 1.0,
            enable_time: 0.01,
            decimation: 8,
            initial_duty: 0.4,
            integrator: 0.0,
            duty: 0.0,
        }
    }

    #[test]
    fn ramp_profile() {
        let ps = TxPhaseShift {
            gate: 0,
            steady_shift: 0.15,
            ramp_time: 0.01,
        };
        assert_eq!(ps.shift_at(0.0), 0.0);
        assert!((ps.shift_at(0.005) - 0.075).abs() < 1e-15);
        assert_eq!(ps.shift_at(0.01), 0.15);
        assert_eq!(ps.shift_at(0.02), 0.15);
    }

    #[test]
    fn pi_identity_at_zero_error() {
        let mut c = pi();
        assert_eq!(c.update(400, 0.01, 100.0, 25e-6), 0.4);
        assert_eq!(c.integrator, 0.0);
    }

    #[test]
    fn pi_saturates_and_freezes() {
        let mut c = pi();
        c.integrator = 0.1;
        assert_eq!(c.update(400, 0.01, -1e6, 25e-6), 1.0);
        assert_eq!(c.integrator, 0.1);
        assert_eq!(c.update(401, 0.01, 0.0, 25e-6), 1.0);
    }

    #[test]
    fn pi_inactive_before_enable() {
        let mut c = pi();
        assert_eq!(c.update(8, 0.005, 0.0, 25e-6), 0.0);
    }
}
