//! Event taxonomy, the sync-event scheduler and the co-simulation loop.

mod cosim;
mod event;
mod scheduler;
mod session;

pub use cosim::{run_cosim, CoSimConfig, CoSimReport, Plant};
pub use event::{write_trace_csv, Event, EventKind, TraceNames};
pub use scheduler::{CycleTiming, DurationSource, Scheduler, WallRecord};
pub use session::{CrossingRecord, EsSession, SessionStats};
