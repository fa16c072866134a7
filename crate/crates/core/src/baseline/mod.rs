//! Fixed-step reference simulators: Forward/Backward Euler plants with
//! per-step diode decisions, and a fine-step trapezoidal oracle with exact
//! event location.

mod oracle;
mod step;
mod ts;

pub use oracle::OraclePlant;
pub use step::{be_step, fe_step, Propagator, PropagatorCache};
pub use ts::{steps_per_cycle, Method, TsPlant};
