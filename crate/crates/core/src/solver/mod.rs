//! Adaptive Taylor-series integration of a piecewise-LTI model.

mod integrate;
mod stack;
mod step;

pub use integrate::{integrate_to_barrier, IntegrationOutcome, IntegrationStats, Recorder, Terminal};
pub use stack::{compute_derivatives, estimate_lte, taylor_advance, DerivativeStack};
pub use step::{adapt_step, SolverSettings, StepControl, StepDecision};
