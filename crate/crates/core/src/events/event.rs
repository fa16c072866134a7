use std::fmt::Write as _;
use std::io::Write;

use crate::controller::PwmConfig;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Controller clock edge; `frozen` when no sync pair follows it.
    Clock {
        edge: u64,
        frozen: bool,
    },
    ControlA,
    ControlB,
    /// Samples sent to the controller.
    SyncA {
        samples: Vec<f64>,
    },
    /// Command applied to the simulator; `from_cycle` is `None` for the startup command.
    SyncB {
        from_cycle: Option<u64>,
        command: PwmConfig,
    },
    SimDone {
        probes: Vec<f64>,
    },
    ActiveSwitch {
        gate: usize,
        on: bool,
    },
    PassiveSwitch {
        diode: usize,
        conducting: bool,
    },
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Clock { frozen: false, .. } => "Clock",
            EventKind::Clock { frozen: true, .. } => "ClockFrozen",
            EventKind::ControlA => "ControlA",
            EventKind::ControlB => "ControlB",
            EventKind::SyncA { .. } => "SyncA",
            EventKind::SyncB { .. } => "SyncB",
            EventKind::SimDone { .. } => "SimDone",
            EventKind::ActiveSwitch { .. } => "ActiveSwitch",
            EventKind::PassiveSwitch { .. } => "PassiveSwitch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub seq: u64,
    pub t_sim: f64,
    pub cycle: u64,
    pub kind: EventKind,
}

/// Gate and diode names used to render trace payloads.
#[derive(Debug, Clone, Default)]
pub struct TraceNames {
    pub gates: Vec<String>,
    pub diodes: Vec<String>,
}

fn list(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::from("[");
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s.push(']');
    s
}

fn payload(kind: &EventKind, names: &TraceNames) -> String {
    let name = |list: &[String], i: usize| list.get(i).cloned().unwrap_or_else(|| i.to_string());
    match kind {
        EventKind::Clock { edge, .. } => format!("edge={edge}"),
        EventKind::ControlA | EventKind::ControlB => String::new(),
        EventKind::SyncA { samples } => format!("samples={}", list(samples.iter().copied())),
        EventKind::SyncB { from_cycle, command } => format!(
            "from={} duty={} phase={}",
            from_cycle.map_or("startup".to_string(), |c| c.to_string()),
            list(command.gates.iter().map(|g| g.duty)),
            list(command.gates.iter().map(|g| g.phase))
        ),
        EventKind::SimDone { probes } => format!("probes={}", list(probes.iter().copied())),
        EventKind::ActiveSwitch { gate, on } => {
            format!("{} {}", name(&names.gates, *gate), if *on { "on" } else { "off" })
        }
        EventKind::PassiveSwitch { diode, conducting } => format!(
            "{} {}",
            name(&names.diodes, *diode),
            if *conducting { "conducting" } else { "blocked" }
        ),
    }
}

/// Columns `seq,t_sim_s,kind,cycle,payload_summary`.
pub fn write_trace_csv(events: &[Event], names: &TraceNames, mut w: impl Write) -> Result<()> {
    writeln!(w, "seq,t_sim_s,kind,cycle,payload_summary")?;
    for e in events {
        writeln!(
            w,
            "{},{:.16e},{},{},{}",
            e.seq,
            e.t_sim,
            e.kind.label(),
            e.cycle,
            payload(&e.kind, names)
        )?;
    }
    Ok(())
}
