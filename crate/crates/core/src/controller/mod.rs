//! Discrete controller model: sampling, control laws and PWM command expansion.

mod builtin;
mod pwm;
mod sampling;
pub mod wire;

pub use builtin::{BuiltinController, ControlLaw, RxCurrentPi, TxPhaseShift};
pub use pwm::{
    gate_states_at, pwm_edges, AseEdge, AseSchedule, Carrier, ComplementaryPair, GatePwm, PwmConfig,
};
pub use sampling::{sample_map, Quantizer, Sensor, SensorSpec};
pub use wire::ExternalController;

use crate::Result;

/// What the controller sees at one sync point.
#[derive(Debug, Clone, Copy)]
pub struct ControllerInput<'a> {
    pub cycle: u64,
    /// Simulation time of the sample, `cycle * T_c`.
    pub t: f64,
    pub samples: &'a [f64],
}

/// A clocked controller producing one PWM command per control cycle.
pub trait Controller: Send {
    /// Command applied during the first control window.
    fn startup(&mut self) -> Result<PwmConfig>;
    /// Command computed from the samples of cycle `k`, applied in window `k + 1`.
    fn step(&mut self, input: &ControllerInput<'_>) -> Result<PwmConfig>;
}
