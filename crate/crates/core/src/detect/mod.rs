//! Diode commutation detection: monitors, crossing search and mode consistency.

mod consistency;
mod crossing;
mod monitor;

pub use consistency::{post_event_consistency, ConsistencyOutcome, HYSTERESIS_SCALE};
pub use crossing::{locate_crossing, output_poly_eval, CrossingReport};
pub use monitor::{arm_monitors, diode_transition, Direction, PassiveMonitor, Watch};
