//! Netlists, switch configurations and their state-space reduction.

mod cache;
mod config;
mod mna;
mod netlist;
mod source;

pub use cache::ModeCache;
pub use config::SwitchConfig;
pub use mna::{stamp_and_reduce, DiodeOutputs, LtiModel};
pub use netlist::{
    parse_netlist, Element, ElementKind, InputSource, Netlist, NetlistError, NodeId, Probe, ProbeKind,
    SwitchModel,
};
pub use source::SourceWaveform;
