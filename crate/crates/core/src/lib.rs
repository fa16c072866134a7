//! Event-synchronized co-simulation of switched power-electronics circuits.
//!
//! The circuit is reduced to one linear state-space model per switch
//! configuration and advanced by an adaptive Taylor-series solver. Gate edges
//! are known in advance from the PWM command of each control cycle; diode
//! commutations are located by root-finding on the Taylor polynomial of the
//! monitored output. A scheduler rendezvouses the solver with a discrete
//! controller once per control period.
//!
//! Fixed-step Forward/Backward Euler baselines and a fine-step trapezoidal
//! oracle share the same circuit matrices so that comparisons isolate the
//! stepping and event policy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baseline;
pub mod circuit;
pub mod controller;
pub mod detect;
pub mod error;
pub mod events;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
